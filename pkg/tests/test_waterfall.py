import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import make_pings
from sonarcat.waterfall import (
    DegenerateGeometry, SlantGeometry, TileBuilder, WaterColumnSample, altitude_from_geometry, build_tiles,
    correct_ping, equalize_image, scale_to_8bit, slant_from_twtt, slant_to_ground,
)
from sonarcat.xtf import Side


def test_slant_to_ground_examples():
    assert slant_to_ground(5.0, 3.0) == 4.0
    assert slant_to_ground(3.0, 3.0) == 0.0
    with pytest.raises(WaterColumnSample):
        slant_to_ground(2.0, 3.0)


def test_slant_from_twtt_examples():
    assert slant_from_twtt(1500.0, 0.2) == pytest.approx(150.0)
    assert slant_from_twtt(1500.0, 0.0) == 0.0
    assert slant_from_twtt(1480.0, 0.1) == pytest.approx(74.0)


def test_altitude_from_geometry_examples():
    assert altitude_from_geometry(10.0, 30.0) == pytest.approx(5.0)
    with pytest.raises(DegenerateGeometry):
        altitude_from_geometry(10.0, 90.0)
    # roll of 10 deg flattens the port beam from 40 to 30 deg
    assert altitude_from_geometry(20.0, 40.0, 10.0, Side.PORT) == pytest.approx(10.0)


def test_zero_altitude_is_identity():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 255, 300)
    out = correct_ping(x, SlantGeometry(h=0.0, slant_max=75.0))
    np.testing.assert_array_equal(out, x)


@given(st.floats(1.0, 100.0), st.floats(0.0, 0.95), st.integers(8, 400), st.floats(0, 255))
def test_constant_ping_stays_constant(smax, hfrac, n, v):
    out = correct_ping(np.full(n, v), SlantGeometry(h=hfrac * smax, slant_max=smax))
    np.testing.assert_allclose(out, v, rtol=1e-12, atol=1e-9)


def test_single_bright_sample_lands_in_predicted_bin():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(64, 1024))
        smax = float(rng.uniform(20, 200))
        h = float(rng.uniform(0, 0.8 * smax))
        geom = SlantGeometry(h=h, slant_max=smax)
        first = int(math.ceil(h * n / smax)) + 1
        i = int(rng.integers(first, n - 1))
        s = i * smax / n
        x = np.zeros(n)
        x[i] = 255.0
        out = correct_ping(x, geom)
        expected = round(n * math.sqrt(s * s - h * h) / geom.ground_extent)
        assert abs(int(np.argmax(out)) - expected) <= 1


def test_degenerate_ping_is_zero_row():
    out = correct_ping(np.full(50, 200.0), SlantGeometry(h=30.0, slant_max=20.0))
    assert out.shape == (50,) and not out.any()


def test_equalize_constant_unchanged():
    img = np.full((10, 10), 77, np.uint8)
    np.testing.assert_array_equal(equalize_image(img), img)


def test_equalize_two_values():
    img = np.full((10, 10), 10, np.uint8)
    img[5:] = 200
    out = equalize_image(img)
    assert set(np.unique(out)) == {0, 255}
    assert (out[img == 10] == 0).all()


def test_equalize_matches_cdf_formula():
    rng = np.random.default_rng(7)
    img = rng.integers(0, 256, (40, 50)).astype(np.uint8)
    out = equalize_image(img)
    vals, counts = np.unique(img, return_counts=True)
    cdf = np.cumsum(counts)
    for v, c in zip(vals, cdf):
        want = math.floor(255 * (c - cdf[0]) / (img.size - cdf[0]) + 0.5)
        assert (out[img == v] == want).all()


def test_sixteen_bit_scaling():
    x = np.array([0, 257, 65535], np.uint16)
    np.testing.assert_allclose(scale_to_8bit(x), [0.0, 1.0, 255.0])


def test_tile_origins_follow_stride():
    tiles = build_tiles(make_pings(300), Side.PORT, tile_rows=256, overlap_rows=64)
    assert [t.tile_origin_row for t in tiles] == [0, 192]
    assert tiles[0].rows == 256 and tiles[1].rows == 108


def test_short_survey_single_tile():
    tiles = build_tiles(make_pings(100), Side.PORT, tile_rows=256)
    assert len(tiles) == 1 and tiles[0].rows == 100


def test_exact_multiple_has_no_empty_tail():
    tiles = build_tiles(make_pings(256), Side.PORT, tile_rows=256, overlap_rows=64)
    assert [t.tile_origin_row for t in tiles] == [0]


def test_no_pings_no_tiles():
    assert build_tiles(make_pings(5, sides=(Side.PORT,)), Side.STARBOARD) == []


def test_tile_metadata():
    tiles = build_tiles(make_pings(20, altitude=30.0, slant=50.0, n_samples=200), Side.STARBOARD, tile_rows=16,
                        overlap_rows=4)
    t = tiles[0]
    assert t.channel_side is Side.STARBOARD
    np.testing.assert_array_equal(t.ping_index_of_row, np.arange(16))
    assert t.ground_range_per_col == pytest.approx(40.0 / 200)
    assert t.equalized


def test_tiles_deterministic():
    rng = np.random.default_rng(1)
    data = rng.integers(0, 256, (60, 2, 128)).astype(np.uint8)
    pings = make_pings(60, samples=lambda i, s: data[i, int(s is Side.STARBOARD)], n_samples=128)
    a = build_tiles(pings, Side.PORT, tile_rows=32, overlap_rows=8)
    b = build_tiles(pings, Side.PORT, tile_rows=32, overlap_rows=8)
    assert all(np.array_equal(x.pixels, y.pixels) for x, y in zip(a, b))


def test_overlap_rows_shared_before_equalization():
    rng = np.random.default_rng(2)
    data = rng.integers(0, 256, (100, 2, 64)).astype(np.uint8)
    pings = make_pings(100, samples=lambda i, s: data[i, int(s is Side.STARBOARD)], n_samples=64)
    tiles = build_tiles(pings, Side.PORT, tile_rows=40, overlap_rows=10, equalize=False)
    for a, b in zip(tiles, tiles[1:]):
        np.testing.assert_array_equal(a.pixels[-10:], b.pixels[:10])


def test_out_of_order_ping_dropped():
    pings = make_pings(4, sides=(Side.PORT,))
    b = TileBuilder(Side.PORT, tile_rows=8, overlap_rows=2)
    for p in pings[:3] + [pings[1]]:
        b.push(p)
    assert b.dropped == 1 and b.total_rows == 3


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 255), min_size=4, max_size=400))
def test_equalize_monotone_and_idempotent(vals):
    img = np.array(vals, np.uint8).reshape(1, -1)
    out = equalize_image(img)
    order = np.argsort(img[0], kind="stable")
    assert (np.diff(out[0][order].astype(int)) >= 0).all()
    again = equalize_image(out)
    assert np.abs(again.astype(int) - out.astype(int)).max() <= 1
