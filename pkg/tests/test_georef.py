import csv
import io
import json
import math
from datetime import timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import T0
from oracles import flat_earth_offset
from sonarcat.clustering import RegionOfInterest
from sonarcat.features import Detector, FeaturePoint
from sonarcat.georef import (
    CSV_COLUMNS, EARTH_RADIUS_M, FLAG_DEGENERATE_TRACK, FLAG_EXTRAPOLATED_NAV, FLAG_UNGEOREFERENCED, GeoObject,
    Layback, NavTrack, PixelGeoContext, UngeoreferencedRow, catalog_csv, catalog_geojson, ground_distance,
    offset_position, pixel_to_geo, read_catalog, roi_to_object, write_catalog,
)
from sonarcat.xtf import NavFix, Side


def _track(n, step=0.5, lat0=48.0, lon0=-4.5, heading=0.0, missing=()):
    track = NavTrack()
    for i in range(n):
        ts = T0 + timedelta(seconds=i / 10)
        lat = lat0 + math.degrees(i * step / EARTH_RADIUS_M)
        nav = None if i in missing else NavFix(lat, lon0, heading, ts)
        track.append(i, ts, nav)
    return track


def _roi(bbox, n=6):
    r0, c0, r1, c1 = bbox
    pts = tuple(FeaturePoint(r0 + k * (r1 - r0) // max(n - 1, 1), c0, Detector.FAST) for k in range(n))
    return RegionOfInterest(0, pts, ((r0 + r1) / 2, (c0 + c1) / 2), bbox, 0, (0, 0, 10 ** 6, 10 ** 6))


def test_col_zero_is_nav_position():
    ctx = PixelGeoContext(_track(5), 0.2, Side.STARBOARD)
    nav = ctx.nav.nav_at(3)
    assert pixel_to_geo(3, 0, ctx) == (nav.latitude, nav.longitude)


def test_starboard_offset_due_east():
    ctx = PixelGeoContext(_track(1, lat0=48.0, lon0=0.0), 1.0, Side.STARBOARD)
    lat, lon = pixel_to_geo(0, 100, ctx)
    assert lat == pytest.approx(48.0, abs=1e-12)
    want = 100 / (6371000 * math.cos(math.radians(48.0))) * (180 / math.pi)
    assert lon == pytest.approx(want, rel=1e-12)


def test_port_offset_due_west():
    ctx = PixelGeoContext(_track(1, lat0=48.0, lon0=0.0), 1.0, Side.PORT)
    _, lon = pixel_to_geo(0, 100, ctx)
    assert lon == pytest.approx(-100 / (6371000 * math.cos(math.radians(48.0))) * (180 / math.pi), rel=1e-12)


@settings(max_examples=100)
@given(st.floats(-70, 70), st.floats(-170, 170), st.floats(0, 359.99), st.floats(0, 500))
def test_offset_matches_reference_formula(lat, lon, bearing, d):
    got = offset_position(lat, lon, bearing, d)
    want = flat_earth_offset(lat, lon, bearing, d)
    assert got == pytest.approx(want, abs=1e-9)
    assert ground_distance((lat, lon), got) == pytest.approx(d, rel=1e-3, abs=1e-6)


def test_layback_shifts_astern():
    track = _track(1, lon0=0.0)
    plain = pixel_to_geo(0, 0, PixelGeoContext(track, 1.0, Side.PORT))
    lay = pixel_to_geo(0, 0, PixelGeoContext(track, 1.0, Side.PORT, Layback(along=10.0)))
    assert lay[0] < plain[0]
    assert ground_distance(plain, lay) == pytest.approx(10.0, rel=1e-6)


def test_extent_across():
    obj = roi_to_object(_roi((0, 10, 19, 59)), PixelGeoContext(_track(40), 0.2, Side.PORT))
    assert obj.extent_across_m == pytest.approx(10.0)


def test_extent_along_sums_steps():
    obj = roi_to_object(_roi((0, 10, 19, 59)), PixelGeoContext(_track(40, step=0.5), 0.2, Side.PORT))
    assert obj.extent_along_m == pytest.approx(10.0, rel=1e-6)
    assert obj.ping_span == (0, 19)
    assert obj.detected_at == T0 + timedelta(seconds=1.9)
    assert obj.flags == ()


def test_stationary_track_is_degenerate():
    obj = roi_to_object(_roi((0, 10, 19, 59)), PixelGeoContext(_track(40, step=0.0), 0.2, Side.PORT))
    assert obj.extent_along_m == 0.0
    assert FLAG_DEGENERATE_TRACK in obj.flags
    assert obj.georeferenced


def test_missing_nav_flags_object():
    ctx = PixelGeoContext(_track(30, missing=set(range(30))), 0.2, Side.PORT)
    obj = roi_to_object(_roi((5, 10, 15, 40)), ctx)
    assert obj.latitude is None and FLAG_UNGEOREFERENCED in obj.flags
    assert obj.pixel_bbox == (5, 10, 15, 40)
    with pytest.raises(UngeoreferencedRow):
        ctx.nav.nav_at(3)


def test_nav_gap_interpolated():
    full, gappy = _track(30), _track(30, missing={10, 11, 12})
    for r in (10, 11, 12):
        assert gappy.nav_at(r).latitude == pytest.approx(full.nav_at(r).latitude, abs=1e-12)
        assert gappy.nav_at(r).source == "interpolated"


def test_nav_tail_extrapolated_and_flagged():
    ctx = PixelGeoContext(_track(30, missing={27, 28, 29}), 0.2, Side.PORT)
    assert ctx.nav.nav_at(29).extrapolated
    obj = roi_to_object(_roi((20, 10, 29, 40)), ctx)
    assert FLAG_EXTRAPOLATED_NAV in obj.flags


def _random_objects(rng, n):
    out = []
    for i in range(n):
        geo = rng.random() > 0.1
        first = int(rng.integers(0, 5000))
        out.append(GeoObject(
            object_id=i,
            latitude=float(rng.uniform(-89, 89)) if geo else None,
            longitude=float(rng.uniform(-179, 179)) if geo else None,
            extent_along_m=float(rng.uniform(0, 30)),
            extent_across_m=float(rng.uniform(0.1, 30)),
            channel_side=Side.PORT if rng.random() < 0.5 else Side.STARBOARD,
            ping_span=(first, first + int(rng.integers(0, 200))),
            feature_count=int(rng.integers(1, 400)),
            source="survey, \"line 7\".xtf",
            detected_at=T0 + timedelta(microseconds=int(rng.integers(0, 10 ** 12))),
            flags=() if geo else (FLAG_UNGEOREFERENCED,),
        ))
    return out


@pytest.mark.parametrize("fmt", ["geojson", "csv"])
def test_catalog_round_trip(tmp_path, fmt):
    objs = _random_objects(np.random.default_rng(0), 50)
    path = write_catalog(objs, tmp_path / f"cat.{fmt}", fmt)
    back = read_catalog(path)
    assert len(back) == 50
    by_id = {o.object_id: o for o in back}
    for o in objs:
        b = by_id[o.object_id]
        if o.latitude is None:
            assert b.latitude is None and b.longitude is None
        else:
            assert abs(b.latitude - o.latitude) < 1e-7 and abs(b.longitude - o.longitude) < 1e-7
        assert b.extent_along_m == pytest.approx(o.extent_along_m, abs=1e-9)
        assert b.extent_across_m == pytest.approx(o.extent_across_m, abs=1e-9)
        assert (b.channel_side, b.ping_span, b.feature_count, b.source) == \
            (o.channel_side, o.ping_span, o.feature_count, o.source)
        assert b.detected_at == o.detected_at


def test_empty_catalogs():
    doc = json.loads(catalog_geojson([]))
    assert doc == {"type": "FeatureCollection", "features": []}
    rows = list(csv.reader(io.StringIO(catalog_csv([]))))
    assert rows == [list(CSV_COLUMNS)]


def test_geojson_coordinate_order():
    obj = _random_objects(np.random.default_rng(1), 1)[0]
    obj = GeoObject(**{**obj.__dict__, "latitude": 48.1, "longitude": -4.5, "flags": ()})
    feat = json.loads(catalog_geojson([obj]))["features"]
    assert len(feat) == 1
    assert feat[0]["geometry"] == {"type": "Point", "coordinates": [-4.5, 48.1]}


def test_csv_is_rfc4180():
    text = catalog_csv(_random_objects(np.random.default_rng(2), 3))
    assert text.count("\r\n") == 4
    rows = list(csv.reader(io.StringIO(text, newline="")))
    assert rows[1][CSV_COLUMNS.index("source")] == "survey, \"line 7\".xtf"


def test_unwritable_path_names_path(tmp_path):
    target = tmp_path / "missing" / "dir" / "cat.geojson"
    with pytest.raises(OSError) as err:
        write_catalog([], target)
    assert str(target) in str(err.value)


def test_catalog_sorted_by_ping():
    objs = _random_objects(np.random.default_rng(3), 20)
    back = json.loads(catalog_geojson(objs))["features"]
    firsts = [f["properties"]["ping_first"] for f in back]
    assert firsts == sorted(firsts)
