import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stereomatch.exceptions import (
    DataError,
    DimensionError,
    FormatError,
    TruncatedFileError,
    UnsupportedFormatError,
)
from stereomatch.image_io import (
    CostVolume,
    DisparityMap,
    GrayImage,
    load_pfm,
    load_pgm,
    save_pfm,
    save_pgm,
)


def write_bytes(path, data):
    path.write_bytes(data)
    return path


def test_pgm_endpoints(tmp_path):
    p = write_bytes(tmp_path / "a.pgm", b"P5\n2 1\n255\n" + bytes([0, 255]))
    img = load_pgm(p)
    assert img.shape == (1, 2)
    assert img.data.tolist() == [[0.0, 1.0]]


def test_pgm_midgray(tmp_path):
    p = write_bytes(tmp_path / "a.pgm", b"P5\n1 1\n255\n" + bytes([128]))
    assert load_pgm(p).data[0, 0] == 128 / 255


def test_pgm_header_comments(tmp_path):
    p = write_bytes(tmp_path / "a.pgm", b"P5\n# made by hand\n2 1\n# c\n255\n" + bytes([7, 9]))
    assert load_pgm(p).data.tolist() == [[7 / 255, 9 / 255]]


@pytest.mark.parametrize(
    "payload, exc",
    [
        (b"P6\n1 1\n255\n\x00\x00\x00", UnsupportedFormatError),
        (b"P5\n1 1\n65535\n\x00\x00", UnsupportedFormatError),
        (b"P5\n2 2\n255\n\x00", TruncatedFileError),
        (b"P5\nx 2\n255\n\x00", FormatError),
        (b"P5\n2", FormatError),
    ],
)
def test_pgm_errors(tmp_path, payload, exc):
    with pytest.raises(exc):
        load_pgm(write_bytes(tmp_path / "bad.pgm", payload))


def test_pgm_monotone(tmp_path):
    p = write_bytes(tmp_path / "ramp.pgm", b"P5\n256 1\n255\n" + bytes(range(256)))
    row = load_pgm(p).data[0]
    assert np.all(np.diff(row) > 0)


def test_pgm_save_load_roundtrip(tmp_path, rng):
    img = GrayImage(rng.integers(0, 256, size=(5, 7)) / 255.0)
    save_pgm(img, tmp_path / "x.pgm")
    assert load_pgm(tmp_path / "x.pgm") == img


def test_pfm_roundtrip_with_invalid(tmp_path):
    data = np.array([[1.5, 2.0, 3.25], [0.0, 7.0, 16.0]], dtype=np.float32)
    valid = np.array([[True, True, False], [True, True, True]])
    m = DisparityMap(data, valid)
    save_pfm(m, tmp_path / "m.pfm")
    back = load_pfm(tmp_path / "m.pfm")
    assert back == m
    assert back.n_invalid == 1


def test_pfm_layout(tmp_path):
    m = DisparityMap(np.zeros((2, 3), dtype=np.float32))
    save_pfm(m, tmp_path / "z.pfm")
    raw = (tmp_path / "z.pfm").read_bytes()
    header = b"Pf\n3 2\n-1.0\n"
    assert raw.startswith(header)
    assert raw[len(header):] == bytes(24)


def test_pfm_rows_bottom_up(tmp_path):
    m = DisparityMap(np.array([[1.0], [2.0]], dtype=np.float32))
    save_pfm(m, tmp_path / "r.pfm")
    payload = (tmp_path / "r.pfm").read_bytes()[len(b"Pf\n1 2\n-1.0\n"):]
    assert np.frombuffer(payload, "<f4").tolist() == [2.0, 1.0]


def test_pfm_invalid_is_negative_infinity_on_disk(tmp_path):
    m = DisparityMap(np.array([[4.0]], dtype=np.float32), np.array([[False]]))
    save_pfm(m, tmp_path / "i.pfm")
    payload = (tmp_path / "i.pfm").read_bytes()[-4:]
    assert np.frombuffer(payload, "<f4")[0] == -np.inf


def test_pfm_big_endian_accepted(tmp_path):
    raw = b"Pf\n2 1\n1.0\n" + np.array([3.0, 4.0], ">f4").tobytes()
    m = load_pfm(write_bytes(tmp_path / "be.pfm", raw))
    assert m.data.tolist() == [[3.0, 4.0]]


def test_pfm_color_rejected(tmp_path):
    raw = b"PF\n1 1\n-1.0\n" + bytes(12)
    with pytest.raises(UnsupportedFormatError):
        load_pfm(write_bytes(tmp_path / "c.pfm", raw))


def test_pfm_nan_rejected(tmp_path):
    raw = b"Pf\n1 1\n-1.0\n" + np.array([np.nan], "<f4").tobytes()
    with pytest.raises(DataError):
        load_pfm(write_bytes(tmp_path / "n.pfm", raw))


def test_pfm_truncated(tmp_path):
    with pytest.raises(TruncatedFileError):
        load_pfm(write_bytes(tmp_path / "t.pfm", b"Pf\n2 2\n-1.0\n" + bytes(8)))


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 6)),
           elements=st.floats(0, 300, width=32)),
    st.data(),
)
def test_pfm_roundtrip_bit_exact(tmp_path_factory, data, draw):
    valid = draw.draw(arrays(np.bool_, data.shape))
    m = DisparityMap(data, valid)
    path = tmp_path_factory.mktemp("pfm") / "m.pfm"
    save_pfm(m, path)
    assert load_pfm(path) == m


def test_types_validate():
    with pytest.raises(DataError):
        GrayImage(np.array([[1.5]]))
    with pytest.raises(DimensionError):
        GrayImage(np.zeros(3))
    with pytest.raises(DataError):
        DisparityMap(np.array([[-1.0]], dtype=np.float32))
    with pytest.raises(DataError):
        CostVolume(np.full((1, 1, 2), np.nan), 1.0)


def test_types_are_immutable():
    img = GrayImage(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        img.data[0, 0] = 1.0


def test_masking_keeps_values_and_equality_ignores_them():
    a = DisparityMap(np.array([[1.5, 2.5]], np.float32), [[True, False]])
    assert a.data[0, 1] == np.float32(2.5)
    b = DisparityMap(np.array([[1.5, 7.0]], np.float32), [[True, False]])
    assert a == b
    assert a.with_valid([[True, True]]).data[0, 1] == np.float32(2.5)
    c = DisparityMap(np.array([[np.nan, -np.inf]], np.float32), [[False, False]])
    assert not c.data.any()
