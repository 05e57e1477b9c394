import io
import struct

import numpy as np
import pytest

from noballnet import weights as wio
from noballnet.backbone import (
    FEATURE_DIM,
    INPUT_SHAPE,
    build_backbone,
    expected_tensors,
    extract_features,
    load_weights,
    save_weights,
)
from noballnet.errors import ShapeError, WeightsFormatError

from oracles import naive_conv2d, naive_maxpool2, naive_relu


@pytest.fixture(scope="module")
def model():
    return build_backbone(42)


def _blob(model):
    buf = io.BytesIO()
    save_weights(model, buf)
    return buf.getvalue()


def extent_offsets(blob):
    """Walk a CNW1 blob by hand; yield (layer name, byte offset of first extent)."""
    pos = 4
    while pos < len(blob):
        (n,) = struct.unpack_from("<I", blob, pos)
        name = blob[pos + 4 : pos + 4 + n].decode()
        pos += 4 + n
        (rank,) = struct.unpack_from("<I", blob, pos)
        dims = struct.unpack_from(f"<{rank}I", blob, pos + 4)
        yield name, pos + 4
        pos += 4 + 4 * rank + 4 * int(np.prod(dims))


def test_same_seed_same_weights(model):
    assert _blob(build_backbone(42)) == _blob(model)


def test_different_seeds_differ():
    assert _blob(build_backbone(1)) != _blob(build_backbone(2))


def test_architecture(model):
    assert model.feature_dim == FEATURE_DIM == 4 * 4 * 32
    convs = model.conv_layers
    assert [c.kernels.shape for c in convs] == [(8, 3, 3, 3), (16, 8, 3, 3), (32, 16, 3, 3)]
    assert all(c.zero_padding == 1 and c.stride == 1 for c in convs)
    assert all(not c.bias.any() for c in convs)


def test_kernel_scale(model):
    for conv in model.conv_layers:
        fan_in = conv.in_channels * 9
        bound = np.sqrt(3.0) * np.sqrt(2.0 / fan_in)
        assert np.abs(conv.kernels).max() <= bound
        # uniform draw with variance 2 / fan_in
        assert conv.kernels.var() == pytest.approx(2.0 / fan_in, rel=0.35)


def test_zero_image_gives_zero_features(model):
    f = extract_features(model, np.zeros(INPUT_SHAPE))
    assert f.shape == (512,)
    assert not f.any()


def test_features_are_pure(model):
    img = np.random.default_rng(5).uniform(-0.5, 0.5, INPUT_SHAPE)
    first = extract_features(model, img).tobytes()
    assert all(extract_features(model, img).tobytes() == first for _ in range(20))


def test_wrong_input_shape(model):
    with pytest.raises(ShapeError):
        extract_features(model, np.zeros((3, 16, 16)))


def test_features_match_naive_stack(model):
    img = np.random.default_rng(11).uniform(-0.5, 0.5, INPUT_SHAPE)
    x = img.tolist()
    for conv in model.conv_layers:
        x = naive_maxpool2(naive_relu(naive_conv2d(x, conv.kernels, conv.bias, 1, 1)))
    want = np.array(x).reshape(-1)
    got = extract_features(model, img)
    assert np.max(np.abs(got - want)) < 1e-10
    assert np.all(np.isfinite(got))


def test_weights_round_trip(model, tmp_path):
    path = tmp_path / "b.cnw"
    save_weights(model, path)
    loaded = load_weights(path)
    for (n1, a), (n2, b) in zip(model.named_tensors(), loaded.named_tensors()):
        assert n1 == n2
        assert a.tobytes() == b.tobytes()
    assert loaded.to_bytes() == model.to_bytes()


def test_file_layout(model):
    blob = _blob(model)
    assert blob[:4] == b"CNW1"
    (n,) = struct.unpack_from("<I", blob, 4)
    assert blob[8 : 8 + n] == b"conv1.kernels"
    rank, *dims = struct.unpack_from("<5I", blob, 8 + n)
    assert (rank, dims) == (4, [8, 3, 3, 3])
    first = struct.unpack_from("<f", blob, 8 + n + 20)[0]
    assert first == model.conv_layers[0].kernels[0, 0, 0, 0]
    names = [name for name, _ in extent_offsets(blob)]
    assert names == [name for name, _ in expected_tensors()]
    assert len(blob) == 4 + sum(
        4 + len(name) + 4 + 4 * len(shape) + 4 * int(np.prod(shape)) for name, shape in expected_tensors()
    )


def test_bad_magic(model):
    blob = b"XXXX" + _blob(model)[4:]
    with pytest.raises(WeightsFormatError, match="magic"):
        load_weights(blob)


@pytest.mark.parametrize("cut", [3, 10, 40, 200, -1])
def test_truncated(model, cut):
    with pytest.raises(WeightsFormatError):
        load_weights(_blob(model)[:cut])


def test_every_layer_extent_corruption_is_named(model):
    blob = _blob(model)
    for name, offset in extent_offsets(blob):
        corrupted = bytearray(blob)
        (dim,) = struct.unpack_from("<I", blob, offset)
        struct.pack_into("<I", corrupted, offset, dim + 1)
        with pytest.raises(WeightsFormatError, match=f"shape mismatch in layer '{name}'"):
            load_weights(bytes(corrupted))


def test_generic_container_reads_any_tensors():
    entries = [("a", np.arange(6.0).reshape(2, 3)), ("b", np.array([0.5]))]
    out = wio.decode(wio.encode(entries))
    assert [n for n, _ in out] == ["a", "b"]
    assert out[0][1].tolist() == [[0, 1, 2], [3, 4, 5]]


def test_float32_storage_rounds():
    (_, v), = wio.decode(wio.encode([("x", np.array([0.1]))]))
    assert v[0] == float(np.float32(0.1))


def test_backbone_weights_are_read_only(model):
    with pytest.raises(ValueError):
        model.conv_layers[0].kernels[0, 0, 0, 0] = 1.0

