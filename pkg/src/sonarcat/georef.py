"""Georeferencing of waterfall pixels and the object catalog.

Positions use a local tangent plane on a spherical earth: an offset of
``d`` metres on bearing ``b`` from ``(lat, lon)`` moves

    dlat = d cos(b) / R
    dlon = d sin(b) / (R cos(lat))

radians, with R = 6371000 m.  Sidescan swaths span at most a few hundred
metres, where this is far below positioning noise.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .clustering import RegionOfInterest
from .xtf import NavFix, Side

EARTH_RADIUS_M = 6371000.0

FLAG_UNGEOREFERENCED = "ungeoreferenced"
FLAG_DEGENERATE_TRACK = "degenerate_track"
FLAG_EXTRAPOLATED_NAV = "extrapolated_nav"

CSV_COLUMNS = (
    "object_id", "latitude", "longitude", "extent_along_m", "extent_across_m", "channel",
    "ping_first", "ping_last", "feature_count", "source", "detected_at",
)


class UngeoreferencedRow(LookupError):
    """Raised when a waterfall row has no navigation to georeference it."""


def offset_position(lat: float, lon: float, bearing: float, distance: float) -> tuple[float, float]:
    b = math.radians(bearing)
    dlat = distance * math.cos(b) / EARTH_RADIUS_M
    dlon = distance * math.sin(b) / (EARTH_RADIUS_M * math.cos(math.radians(lat)))
    return lat + math.degrees(dlat), lon + math.degrees(dlon)


def ground_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Flat-earth distance in metres between two (lat, lon) points."""
    lat_mid = math.radians(0.5 * (a[0] + b[0]))
    dn = math.radians(b[0] - a[0]) * EARTH_RADIUS_M
    de = math.radians(b[1] - a[1]) * EARTH_RADIUS_M * math.cos(lat_mid)
    return math.hypot(dn, de)


def across_bearing(heading: float, side: Side) -> float:
    """Bearing from the track line towards the given side's swath."""
    if side is Side.PORT:
        return (heading - 90.0) % 360.0
    if side is Side.STARBOARD:
        return (heading + 90.0) % 360.0
    raise ValueError(f"no across-track direction for channel side {side.value}")


def _angle_lerp(a: float, b: float, f: float) -> float:
    diff = (b - a + 180.0) % 360.0 - 180.0
    return (a + f * diff) % 360.0


class NavTrack:
    """Navigation and ping identity per global waterfall row of one channel."""

    def __init__(self):
        self.ping_numbers: list[int] = []
        self.timestamps: list[datetime] = []
        self.navs: list[NavFix | None] = []
        self._fixed: list[int] = []  # rows carrying their own fix

    @classmethod
    def from_pings(cls, pings: Iterable) -> "NavTrack":
        track = cls()
        for p in pings:
            track.append(p.ping_number, p.timestamp, p.nav)
        return track

    def append(self, ping_number: int, timestamp: datetime, nav: NavFix | None):
        self.ping_numbers.append(ping_number)
        self.timestamps.append(timestamp)
        if nav is not None and nav.source == "fix":
            self._fixed.append(len(self.navs))
        self.navs.append(nav)

    def __len__(self):
        return len(self.navs)

    def nav_at(self, row: int) -> NavFix:
        """Navigation of a row; gaps are filled from the fixes known so far.

        A gap between two fixes is interpolated in time, a gap before the
        first or after the last fix takes the nearest fix, marked
        extrapolated.
        """
        if not 0 <= row < len(self.navs):
            raise UngeoreferencedRow(f"row {row} is outside the track")
        nav = self.navs[row]
        if nav is not None:
            return nav
        if not self._fixed:
            raise UngeoreferencedRow(f"row {row} has no navigation")
        j = bisect.bisect_left(self._fixed, row)
        if j == 0 or j == len(self._fixed):
            near = self.navs[self._fixed[0 if j == 0 else -1]]
            return replace(near, source="extrapolated")
        a, b = self.navs[self._fixed[j - 1]], self.navs[self._fixed[j]]
        ta, tb = self.timestamps[self._fixed[j - 1]], self.timestamps[self._fixed[j]]
        span = (tb - ta).total_seconds()
        f = (self.timestamps[row] - ta).total_seconds() / span if span > 0 else 0.0
        f = min(max(f, 0.0), 1.0)
        return NavFix(a.latitude + f * (b.latitude - a.latitude), a.longitude + f * (b.longitude - a.longitude),
                      _angle_lerp(a.heading, b.heading, f), self.timestamps[row], "interpolated")

    def position(self, row: float) -> tuple[float, float, float]:
        """(lat, lon, heading) at a possibly fractional row, linearly interpolated."""
        r0 = int(math.floor(row))
        f = row - r0
        a = self.nav_at(r0)
        if f == 0.0:
            return a.latitude, a.longitude, a.heading
        b = self.nav_at(r0 + 1)
        return (a.latitude + f * (b.latitude - a.latitude),
                a.longitude + f * (b.longitude - a.longitude),
                _angle_lerp(a.heading, b.heading, f))

    def step_length(self, row: int) -> float:
        """Along-track distance covered by one row: to the next row, or from the previous at the end."""
        if row + 1 < len(self.navs):
            a, b = self.nav_at(row), self.nav_at(row + 1)
        elif row >= 1:
            a, b = self.nav_at(row - 1), self.nav_at(row)
        else:
            return 0.0
        return ground_distance((a.latitude, a.longitude), (b.latitude, b.longitude))


@dataclass(frozen=True)
class Layback:
    """Fixed sonar offset from the navigation antenna: metres behind it and to starboard."""
    along: float = 0.0
    across: float = 0.0


@dataclass
class PixelGeoContext:
    nav: NavTrack
    ground_range_per_col: float
    channel_side: Side
    layback: Layback = field(default_factory=Layback)

    def __post_init__(self):
        if not self.ground_range_per_col > 0:
            raise ValueError("ground_range_per_col must be positive")


def pixel_to_geo(row: float, col: float, ctx: PixelGeoContext) -> tuple[float, float]:
    lat, lon, heading = ctx.nav.position(row)
    if ctx.layback.along or ctx.layback.across:
        lat, lon = offset_position(lat, lon, (heading + 180.0) % 360.0, ctx.layback.along)
        lat, lon = offset_position(lat, lon, (heading + 90.0) % 360.0, ctx.layback.across)
    d = col * ctx.ground_range_per_col
    if d == 0:
        return lat, lon
    return offset_position(lat, lon, across_bearing(heading, ctx.channel_side), d)


@dataclass(frozen=True)
class GeoObject:
    object_id: int
    latitude: float | None
    longitude: float | None
    extent_along_m: float
    extent_across_m: float
    channel_side: Side
    ping_span: tuple[int, int]
    feature_count: int
    source: str
    detected_at: datetime
    flags: tuple[str, ...] = ()
    pixel_centroid: tuple[float, float] | None = None
    pixel_bbox: tuple[int, int, int, int] | None = None

    def __post_init__(self):
        if self.ping_span[0] > self.ping_span[1]:
            raise ValueError("ping_span must be ordered")
        if self.latitude is not None and not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if self.longitude is not None and not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude out of range: {self.longitude}")

    @property
    def georeferenced(self) -> bool:
        return self.latitude is not None


def roi_to_object(roi: RegionOfInterest, ctx: PixelGeoContext, object_id: int = 0,
                  source: str = "") -> GeoObject:
    """Catalog entry for one ROI given in global row coordinates."""
    r0, c0, r1, c1 = roi.bbox
    flags = []
    try:
        lat, lon = pixel_to_geo(roi.centroid[0], roi.centroid[1], ctx)
    except UngeoreferencedRow:
        lat = lon = None
        flags.append(FLAG_UNGEOREFERENCED)
    try:
        along = sum(ctx.nav.step_length(r) for r in range(r0, r1 + 1))
        if along == 0.0:
            flags.append(FLAG_DEGENERATE_TRACK)
    except UngeoreferencedRow:
        along = 0.0
    try:
        if any(ctx.nav.nav_at(r).extrapolated for r in range(r0, r1 + 1)):
            flags.append(FLAG_EXTRAPOLATED_NAV)
    except UngeoreferencedRow:
        pass
    return GeoObject(
        object_id=object_id,
        latitude=lat,
        longitude=lon,
        extent_along_m=along,
        extent_across_m=(c1 - c0 + 1) * ctx.ground_range_per_col,
        channel_side=ctx.channel_side,
        ping_span=(ctx.nav.ping_numbers[r0], ctx.nav.ping_numbers[r1]),
        feature_count=roi.feature_count,
        source=source,
        detected_at=ctx.nav.timestamps[r1],
        flags=tuple(flags),
        pixel_centroid=roi.centroid,
        pixel_bbox=roi.bbox,
    )


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def _parse_iso(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)


def _ordered(objects: Iterable[GeoObject]) -> list[GeoObject]:
    return sorted(objects, key=lambda o: (o.ping_span[0], o.object_id))


def object_properties(obj: GeoObject) -> dict:
    props = {
        "object_id": obj.object_id,
        "latitude": obj.latitude,
        "longitude": obj.longitude,
        "extent_along_m": obj.extent_along_m,
        "extent_across_m": obj.extent_across_m,
        "channel": obj.channel_side.value,
        "ping_first": obj.ping_span[0],
        "ping_last": obj.ping_span[1],
        "feature_count": obj.feature_count,
        "source": obj.source,
        "detected_at": _iso(obj.detected_at),
        "flags": list(obj.flags),
    }
    if obj.pixel_centroid is not None:
        props["pixel_centroid"] = list(obj.pixel_centroid)
    if obj.pixel_bbox is not None:
        props["pixel_bbox"] = list(obj.pixel_bbox)
    return props


def object_feature(obj: GeoObject) -> dict:
    geometry = None
    if obj.georeferenced:
        geometry = {"type": "Point", "coordinates": [obj.longitude, obj.latitude]}
    return {"type": "Feature", "geometry": geometry, "properties": object_properties(obj)}


def object_from_properties(props: dict) -> GeoObject:
    return GeoObject(
        object_id=int(props["object_id"]),
        latitude=props["latitude"],
        longitude=props["longitude"],
        extent_along_m=float(props["extent_along_m"]),
        extent_across_m=float(props["extent_across_m"]),
        channel_side=Side(props["channel"]),
        ping_span=(int(props["ping_first"]), int(props["ping_last"])),
        feature_count=int(props["feature_count"]),
        source=props["source"],
        detected_at=_parse_iso(props["detected_at"]),
        flags=tuple(props.get("flags", ())),
        pixel_centroid=tuple(props["pixel_centroid"]) if props.get("pixel_centroid") else None,
        pixel_bbox=tuple(props["pixel_bbox"]) if props.get("pixel_bbox") else None,
    )


def catalog_geojson(objects: Iterable[GeoObject]) -> str:
    doc = {"type": "FeatureCollection", "features": [object_feature(o) for o in _ordered(objects)]}
    return json.dumps(doc, indent=1) + "\n"


def catalog_csv(objects: Iterable[GeoObject]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    for o in _ordered(objects):
        props = object_properties(o)
        writer.writerow(["" if props[k] is None else repr(props[k]) if isinstance(props[k], float)
                         else props[k] for k in CSV_COLUMNS])
    return buf.getvalue()


def write_catalog(objects: Sequence[GeoObject], path, fmt: str = "geojson") -> Path:
    """Write the catalog as ``geojson`` or ``csv``; returns the path written."""
    if fmt == "geojson":
        text = catalog_geojson(objects)
    elif fmt == "csv":
        text = catalog_csv(objects)
    else:
        raise ValueError(f"unknown catalog format {fmt!r}")
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write catalog {path}: {exc.strerror or exc}") from exc
    return path


def read_catalog(path) -> list[GeoObject]:
    """Parse a catalog written by ``write_catalog`` (format taken from the suffix)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".csv":
        rows = csv.DictReader(io.StringIO(text, newline=""))
        out = []
        for row in rows:
            props = dict(row)
            for k in ("latitude", "longitude"):
                props[k] = float(props[k]) if props[k] else None
            out.append(object_from_properties(props))
        return out
    doc = json.loads(text)
    return [object_from_properties(f["properties"]) for f in doc["features"]]


def track_positions(nav: NavTrack) -> np.ndarray:
    """(lat, lon) per row, NaN where navigation is missing."""
    return np.array([(n.latitude, n.longitude) if n is not None else (np.nan, np.nan) for n in nav.navs])
