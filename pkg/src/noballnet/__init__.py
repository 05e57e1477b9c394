"""Binary image classifier built from a frozen convolutional feature
extractor and a retrained softmax output layer, with k-fold evaluation."""

__version__ = "0.1.0"
