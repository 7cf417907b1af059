import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from filmrec import core


@pytest.mark.parametrize("w,h,c,fill", [(2, 2, 1, 0.0), (3, 1, 2, -1.0), (1, 1, 3, 0.5)])
def test_raster_create_constant(w, h, c, fill):
    r = core.raster_create(w, h, c, fill)
    assert r.shape == (h, w, c) and r.dtype == np.float32
    assert r.size == w * h * c
    assert np.all(r == np.float32(fill))


@pytest.mark.parametrize("args", [(0, 2, 1), (2, -1, 1), (2, 2, 4), (2, 2, 0)])
def test_raster_create_rejects(args):
    with pytest.raises(core.RasterError):
        core.raster_create(*args)


def test_raster_create_rejects_nonfinite_fill():
    with pytest.raises(core.RasterError):
        core.raster_create(2, 2, 1, float("nan"))


def test_as_raster_adds_channel_axis():
    assert core.as_raster(np.zeros((3, 4))).shape == (3, 4, 1)
    with pytest.raises(core.RasterError):
        core.as_raster(np.zeros((3, 4, 2)), channels=3)


def test_normalized_coords_pixel_centers():
    g = core.normalized_coords(4, 2)
    assert g.shape == (2, 4, 2)
    np.testing.assert_allclose(g[0, 0], [0.125, 0.25])
    np.testing.assert_allclose(g[1, 3], [0.875, 0.75])


@pytest.mark.parametrize("x,expected", [(0.5, 0.0), (0.0, -1.0), (0.75, 0.5), (1.0, 1.0)])
def test_rescale_unit_to_signed(x, expected):
    r = np.full((1, 1, 1), x, np.float32)
    out = core.rescale_linear(r, core.UNIT, core.SIGNED_UNIT)
    assert out[0, 0, 0] == pytest.approx(expected, abs=1e-7)


def test_rescale_rejects_degenerate_range_and_out_of_range():
    r = np.full((1, 1, 1), 0.5, np.float32)
    with pytest.raises(core.RasterError):
        core.rescale_linear(r, core.ValueRange(1.0, 1.0), core.UNIT)
    with pytest.raises(core.RasterError):
        core.rescale_linear(np.full((1, 1, 1), 1.5, np.float32), core.UNIT, core.SIGNED_UNIT)


@settings(max_examples=50, deadline=None)
@given(hnp.arrays(np.float32, (3, 4, 2), elements=st.floats(0, 1, width=32)))
def test_rescale_round_trip(r):
    there = core.rescale_linear(r, core.UNIT, core.SIGNED_UNIT)
    back = core.rescale_linear(there, core.SIGNED_UNIT, core.UNIT)
    np.testing.assert_allclose(back, r, atol=1e-6)
    np.testing.assert_allclose(there, 2 * r.astype(np.float64) - 1, atol=1e-6)


def test_fmap_round_trip_small(tmp_path):
    r = np.arange(8, dtype=np.float32).reshape(2, 2, 2) % 4
    core.fmap_write(r, tmp_path / "a.fmap")
    back = core.fmap_read(tmp_path / "a.fmap")
    assert back.dtype == np.float32 and np.array_equal(back, r)


def test_fmap_layout(tmp_path):
    r = np.array([[[1.0, 2.0]]], np.float32)
    core.fmap_write(r, tmp_path / "a.fmap")
    raw = (tmp_path / "a.fmap").read_bytes()
    assert raw[:24] == struct.pack("<4sIIIII", b"FMAP", 1, 1, 1, 2, 0)
    assert raw[24:] == struct.pack("<ff", 1.0, 2.0)


def _write_header(path, magic=b"FMAP", version=1, w=1, h=1, c=1, payload=4):
    path.write_bytes(struct.pack("<4sIIIII", magic, version, w, h, c, 0) + b"\0" * payload)


def test_fmap_bad_magic(tmp_path):
    _write_header(tmp_path / "x.fmap", magic=b"FMAQ")
    with pytest.raises(core.FmapError, match="magic"):
        core.fmap_read(tmp_path / "x.fmap")


def test_fmap_unsupported_channels(tmp_path):
    _write_header(tmp_path / "x.fmap", c=4, payload=16)
    with pytest.raises(core.FmapError, match="channel"):
        core.fmap_read(tmp_path / "x.fmap")


def test_fmap_truncated(tmp_path):
    _write_header(tmp_path / "x.fmap", w=2, h=2, c=1, payload=8)
    with pytest.raises(core.FmapError):
        core.fmap_read(tmp_path / "x.fmap")


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=3, max_dims=3, min_side=1, max_side=6).filter(
    lambda s: s[2] <= 3), elements=st.floats(-1e6, 1e6, width=32)))
def test_fmap_round_trip_property(tmp_path_factory, r):
    p = tmp_path_factory.mktemp("fm") / "r.fmap"
    core.fmap_write(r, p)
    assert core.fmap_read(p).tobytes() == r.tobytes()


@pytest.mark.parametrize("v,back", [(1.0, 1.0), (0.0, 0.0), (0.5, 128 / 255)])
def test_png_quantization(tmp_path, v, back):
    r = np.full((2, 3, 3), v, np.float32)
    core.image_write_png(r, tmp_path / "i.png")
    out = core.image_read_png(tmp_path / "i.png")
    assert out.shape == (2, 3, 3)
    assert out[0, 0, 0] == pytest.approx(back, abs=1e-7)


def test_png_channel_order(tmp_path):
    r = np.zeros((1, 1, 3), np.float32)
    r[0, 0] = [1.0, 0.0, 0.5]
    core.image_write_png(r, tmp_path / "i.png")
    np.testing.assert_allclose(core.image_read_png(tmp_path / "i.png")[0, 0], [1.0, 0.0, 128 / 255])


def test_png_gray(tmp_path):
    r = np.linspace(0, 1, 6, dtype=np.float32).reshape(2, 3, 1)
    core.image_write_png(r, tmp_path / "g.png")
    out = core.image_read_png(tmp_path / "g.png")
    assert out.shape == (2, 3, 1)
    assert np.abs(out - r).max() <= 0.5 / 255 + 1e-7


def test_luminance_weights():
    r = np.zeros((1, 3, 3), np.float32)
    r[0, 0, 0] = r[0, 1, 1] = r[0, 2, 2] = 1.0
    np.testing.assert_allclose(core.luminance(r)[0, :, 0], [0.299, 0.587, 0.114], atol=1e-6)
