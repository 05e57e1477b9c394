"""Exception hierarchy shared by every stage of the pipeline."""


class NoballError(Exception):
    """Base class; the CLI turns any of these into a nonzero exit."""


class ShapeError(NoballError, ValueError):
    pass


class GeometryError(ShapeError):
    pass


class NumericInputError(NoballError, ValueError):
    pass


class WeightsFormatError(NoballError, ValueError):
    pass


class DecodeError(NoballError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ConfigError(NoballError, ValueError):
    pass


class ManifestError(NoballError, ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DegenerateDataError(NoballError, ValueError):
    pass


class DivergenceError(NoballError, ArithmeticError):
    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class InfeasibleError(NoballError, ValueError):
    pass


class EmptyInputError(NoballError, ValueError):
    pass


class FoldError(NoballError):
    """Wraps a failure raised while processing one cross-validation fold."""

    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause


class UndefinedMetricError(NoballError, ValueError):
    pass
