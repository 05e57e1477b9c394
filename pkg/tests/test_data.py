import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from noballnet.data import (
    ClassLabel,
    DatasetManifest,
    decode_image,
    encode_ppm,
    load_manifest,
    parse_manifest,
    preprocess,
    write_manifest,
)
from noballnet.errors import DecodeError, ManifestError, ShapeError


def test_decode_single_red_pixel():
    img = decode_image(b"P6\n1 1\n255\n" + bytes([255, 0, 0]))
    assert img.shape == (3, 1, 1)
    assert img.tolist() == [[[1.0]], [[0.0]], [[0.0]]]


def test_decode_pgm_replicates_channels():
    img = decode_image(b"P5 2 1 255\n" + bytes([128, 0]))
    assert img.shape == (3, 1, 2)
    assert np.all(img[:, 0, 0] == 128 / 255)
    assert np.all(img[:, 0, 1] == 0)


def test_decode_skips_header_comments():
    img = decode_image(b"P6\n# made by hand\n1 1\n# max\n255\n" + bytes([0, 255, 0]))
    assert img[:, 0, 0].tolist() == [0.0, 1.0, 0.0]


def test_decode_truncated_body_reports_offset():
    with pytest.raises(DecodeError) as err:
        decode_image(b"P6\n2 2\n255\n" + bytes(5))
    assert err.value.offset == 11 + 5


@pytest.mark.parametrize(
    "blob, match",
    [
        (b"P3\n1 1\n255\n0 0 0", "magic"),
        (b"", "magic"),
        (b"P6\n1 1\n65535\n" + bytes(6), "maxval"),
        (b"P6\n1 1\n15\n" + bytes(3), "maxval"),
        (b"P6\n1", "truncated header"),
        (b"P6\n1 x 255\n", "unexpected byte"),
    ],
)
def test_decode_errors(blob, match):
    with pytest.raises(DecodeError, match=match):
        decode_image(blob)


@given(hnp.arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6), st.just(3))))
def test_ppm_round_trip_is_lossless(pixels):
    img = decode_image(encode_ppm(pixels))
    back = np.round(img * 255).astype(np.uint8).transpose(1, 2, 0)
    assert np.array_equal(back, pixels)


def test_preprocess_no_resize_just_centres():
    img = np.random.default_rng(0).uniform(size=(3, 32, 32))
    assert np.array_equal(preprocess(img), img - 0.5)


def test_preprocess_nearest_neighbour_64():
    img = np.random.default_rng(1).uniform(size=(3, 64, 64))
    out = preprocess(img)
    for i in range(32):
        for j in range(32):
            src_i, src_j = (i * 64) // 32, (j * 64) // 32
            assert (src_i, src_j) == (2 * i, 2 * j)
            assert np.array_equal(out[:, i, j], img[:, src_i, src_j] - 0.5)


def test_preprocess_odd_size_index_oracle():
    img = np.random.default_rng(2).uniform(size=(3, 45, 20))
    out = preprocess(img)
    for i in range(32):
        for j in range(32):
            assert np.array_equal(out[:, i, j], img[:, (i * 45) // 32, (j * 20) // 32] - 0.5)


def test_preprocess_constant_half_is_zero():
    assert not preprocess(np.full((3, 40, 50), 0.5)).any()


@pytest.mark.parametrize("shape", [(3, 7, 32), (3, 32, 4), (1, 32, 32), (32, 32)])
def test_preprocess_shape_errors(shape):
    with pytest.raises(ShapeError):
        preprocess(np.zeros(shape))


@given(st.integers(8, 80), st.integers(8, 80), st.integers(0, 2**32 - 1))
def test_preprocess_range_and_shape(h, w, seed):
    out = preprocess(np.random.default_rng(seed).uniform(size=(3, h, w)))
    assert out.shape == (3, 32, 32)
    assert out.min() >= -0.5 and out.max() <= 0.5


def test_manifest_two_lines(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("path,label\na.ppm,legal\nsub/b.ppm,noball\n")
    m = load_manifest(path)
    assert m.entries == [("a.ppm", ClassLabel.LEGAL), ("sub/b.ppm", ClassLabel.NOBALL)]
    assert m.resolve("a.ppm") == tmp_path / "a.ppm"


def test_manifest_unknown_label_line_number():
    with pytest.raises(ManifestError, match="line 3") as err:
        parse_manifest("path,label\na.ppm,legal\nb.ppm,wide\n")
    assert err.value.line == 3


def test_manifest_duplicate_path():
    with pytest.raises(ManifestError, match="duplicate") as err:
        parse_manifest("path,label\na.ppm,legal\na.ppm,noball\n")
    assert err.value.line == 3


def test_manifest_wrong_field_count():
    with pytest.raises(ManifestError, match="line 2"):
        parse_manifest("path,label\na.ppm\n")


def test_manifest_write_read_round_trip(tmp_path):
    m = DatasetManifest([("x,y.ppm", ClassLabel.NOBALL), ("z.ppm", ClassLabel.LEGAL)])
    write_manifest(m, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "path,label"
    assert load_manifest(tmp_path / "m.csv").entries == m.entries


def test_label_tokens():
    assert [c.token for c in ClassLabel] == ["legal", "noball"]
    assert int(ClassLabel.NOBALL) == 1
    with pytest.raises(ValueError):
        ClassLabel.from_token("wide")
