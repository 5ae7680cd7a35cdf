"""Synthetic sidescan surveys with planted targets and ground truth.

The seafloor is drawn per ping and per ground-range bin as
``floor + Rayleigh(sigma)``.  A target multiplies the Rayleigh draw by its
highlight gain over its footprint and casts a hard shadow (floor only)
that extends ``shadow_length`` metres further from nadir.  The ground
image is then mapped onto slant-range samples, the inverse of the
waterfall correction, so reading the survey back exercises the full
correction path.

Randomness comes from numpy's PCG64.  Ping ``i`` of channel ``c`` draws
from ``SeedSequence(seed, spawn_key=(i, c))``, so any ping can be
regenerated on its own and output does not depend on generation order.
"""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .clustering import RegionOfInterest
from .features import Detector, FeaturePoint
from .georef import (GeoObject, NavTrack, PixelGeoContext, catalog_geojson, offset_position,
                     read_catalog, roi_to_object)
from .xtf import ChannelInfo, NavFix, Side, SonarPing, header_for, write_xtf as _write_xtf

DEFAULT_START = datetime(2024, 6, 1, 12, 0, 0, tzinfo=timezone.utc)


class ScenarioError(ValueError):
    pass


class Shape(enum.Enum):
    RECT = "rect"
    ELLIPSE = "ellipse"
    LINE_ROPE = "line_rope"


@dataclass(frozen=True)
class TargetSpec:
    shape: Shape
    ping_index: float  # along-track centre, in pings
    ground_range: float  # across-track centre, metres from nadir
    side: Side
    along: float  # size, metres
    across: float
    gain: float = 4.0
    shadow_length: float = 8.0
    rope_width: float = 0.4  # line_rope only

    def __post_init__(self):
        if not self.gain > 1.0:
            raise ScenarioError("highlight gain must be > 1")
        if self.shadow_length < 0:
            raise ScenarioError("shadow length must be >= 0")
        if not (self.along > 0 and self.across > 0):
            raise ScenarioError("target size must be positive")
        if self.side not in (Side.PORT, Side.STARBOARD):
            raise ScenarioError("target side must be port or starboard")


@dataclass(frozen=True)
class Track:
    latitude: float = 48.0
    longitude: float = -4.5
    heading: float = 0.0
    speed: float = 1.5  # m/s
    ping_rate: float = 10.0  # Hz
    start: datetime = DEFAULT_START

    @property
    def ping_spacing(self) -> float:
        return self.speed / self.ping_rate


@dataclass(frozen=True)
class SurveyScenario:
    seed: int = 0
    ping_count: int = 2000
    samples_per_ping: int = 1024
    slant_range_max: float = 150.0
    altitude: float = 15.0
    sound_velocity: float = 1500.0
    track: Track = field(default_factory=Track)
    sigma: float = 30.0  # Rayleigh scale, 8-bit intensity units
    floor: float = 10.0
    targets: tuple[TargetSpec, ...] = ()
    bytes_per_sample: int = 1
    sides: tuple[Side, ...] = (Side.PORT, Side.STARBOARD)

    def __post_init__(self):
        if not 0 <= self.altitude < self.slant_range_max:
            raise ScenarioError("altitude must be within [0, slant_range_max)")
        if not self.track.ping_rate > 0:
            raise ScenarioError("ping rate must be positive")
        if self.ping_count < 0 or self.samples_per_ping < 2:
            raise ScenarioError("need ping_count >= 0 and samples_per_ping >= 2")
        if self.sigma < 0 or self.floor < 0:
            raise ScenarioError("sigma and floor must be non-negative")
        if self.bytes_per_sample not in (1, 2):
            raise ScenarioError("bytes_per_sample must be 1 or 2")
        object.__setattr__(self, "targets", tuple(self.targets))
        for i, t in enumerate(self.targets):
            self._check_target(i, t)

    @property
    def ground_extent(self) -> float:
        return math.sqrt(self.slant_range_max ** 2 - self.altitude ** 2)

    @property
    def ground_bin(self) -> float:
        return self.ground_extent / self.samples_per_ping

    def _check_target(self, i: int, t: TargetSpec):
        g = self.ground_extent
        if t.ground_range - t.across / 2 < 0 or t.ground_range + t.across / 2 > g:
            raise ScenarioError(f"target {i} lies outside the swath ground extent (0, {g:.2f}) m")
        half = t.along / 2 / self.track.ping_spacing
        if t.ping_index - half < 0 or t.ping_index + half > self.ping_count - 1:
            raise ScenarioError(f"target {i} lies outside the surveyed pings")
        if t.side not in self.sides:
            raise ScenarioError(f"target {i} is on an unrecorded channel")


def _rng(seed: int, ping: int, channel: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(ping, channel))))


def target_masks(t: TargetSpec, ping: int, scenario: SurveyScenario) -> tuple[np.ndarray, np.ndarray]:
    """Highlight and shadow masks over the ground bins of one ping."""
    n = scenario.samples_per_ping
    gb = scenario.ground_bin
    g = np.arange(n) * gb  # bin k sits at k * G / n, as in the corrected waterfall
    da = (ping - t.ping_index) * scenario.track.ping_spacing
    dc = g - t.ground_range
    a2, c2 = t.along / 2, t.across / 2
    if t.shape is Shape.RECT:
        hit = (abs(da) <= a2) & (np.abs(dc) <= c2)
    elif t.shape is Shape.ELLIPSE:
        hit = (da / a2) ** 2 + (dc / c2) ** 2 <= 1.0
    else:
        # a straight rope across the footprint diagonal
        if abs(da) > a2:
            hit = np.zeros(n, bool)
        else:
            dist = np.abs(dc * t.along - da * t.across) / math.hypot(t.along, t.across)
            hit = (dist <= t.rope_width / 2) & (np.abs(dc) <= c2)
    shadow = np.zeros(n, bool)
    if hit.any() and t.shadow_length > 0:
        far = g[hit].max()
        shadow = (g > far) & (g <= far + t.shadow_length)
    return hit, shadow


def ground_row(scenario: SurveyScenario, ping: int, side: Side) -> np.ndarray:
    """Ground-range intensities (8-bit scale) of one ping and channel."""
    ch = scenario.sides.index(side)
    rng = _rng(scenario.seed, ping, ch)
    n = scenario.samples_per_ping
    speckle = rng.rayleigh(scenario.sigma, n) if scenario.sigma > 0 else np.zeros(n)
    gain = np.ones(n)
    dark = np.zeros(n, bool)
    for t in scenario.targets:
        if t.side is not side:
            continue
        hit, shadow = target_masks(t, ping, scenario)
        gain[hit] = np.maximum(gain[hit], t.gain)
        dark |= shadow
    dark &= gain == 1.0
    row = scenario.floor + gain * speckle
    row[dark] = scenario.floor
    return row


def ground_to_slant(ground: np.ndarray, scenario: SurveyScenario, water: np.ndarray) -> np.ndarray:
    """Resample a ground-range row onto slant-range samples.

    Slant sample ``j`` sits at ``j * S / n``; inside the water column it
    takes the supplied water value, beyond it the linear interpolation of
    the ground row at ``sqrt(s**2 - h**2)``.
    """
    n = ground.size
    s = np.arange(n) * scenario.slant_range_max / n
    h = scenario.altitude
    out = water.copy()
    on = s >= h
    gpos = np.sqrt(s[on] ** 2 - h * h) / scenario.ground_bin
    out[on] = np.interp(gpos, np.arange(n), ground)
    return out


def ping_samples(scenario: SurveyScenario, ping: int, side: Side) -> np.ndarray:
    ground = ground_row(scenario, ping, side)
    ch = scenario.sides.index(side)
    rng = _rng(scenario.seed, ping, len(scenario.sides) + ch)
    water = scenario.floor + rng.rayleigh(max(scenario.sigma, 1e-9) / 8, ground.size)
    values = ground_to_slant(ground, scenario, water)
    if scenario.bytes_per_sample == 2:
        return np.clip(np.floor(values * 257.0 + 0.5), 0, 65535).astype(np.uint16)
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def track_fix(scenario: SurveyScenario, ping: int) -> NavFix:
    tr = scenario.track
    lat, lon = offset_position(tr.latitude, tr.longitude, tr.heading, ping * tr.ping_spacing)
    return NavFix(lat, lon, tr.heading % 360.0, ping_time(scenario, ping))


def ping_time(scenario: SurveyScenario, ping: int) -> datetime:
    # XTF keeps hundredths of a second
    cs = round(ping * 100 / scenario.track.ping_rate)
    return scenario.track.start + timedelta(milliseconds=10 * cs)


def channel_infos(scenario: SurveyScenario) -> list[ChannelInfo]:
    return [ChannelInfo(side, scenario.bytes_per_sample, scenario.samples_per_ping, side.value, None, i)
            for i, side in enumerate(scenario.sides)]


def truth_objects(scenario: SurveyScenario, source: str = "truth") -> list[GeoObject]:
    """Ground-truth catalog: one object per target, centred on its footprint."""
    nav = NavTrack()
    for i in range(scenario.ping_count):
        nav.append(i, ping_time(scenario, i), track_fix(scenario, i))
    gb = scenario.ground_bin
    sp = scenario.track.ping_spacing
    out = []
    for k, t in enumerate(scenario.targets):
        r0 = max(0, int(math.ceil(t.ping_index - t.along / 2 / sp)))
        r1 = min(scenario.ping_count - 1, int(math.floor(t.ping_index + t.along / 2 / sp)))
        c0 = int(math.ceil((t.ground_range - t.across / 2) / gb))
        c1 = min(scenario.samples_per_ping - 1, int(math.floor((t.ground_range + t.across / 2) / gb)))
        marker = FeaturePoint(int(round(t.ping_index)), int(round(t.ground_range / gb)), Detector.FAST)
        roi = RegionOfInterest(k, (marker,), (t.ping_index, t.ground_range / gb),
                               (r0, c0, r1, c1), 0, (r0, c0, r1, c1), t.side, gb)
        ctx = PixelGeoContext(nav, gb, t.side)
        obj = roi_to_object(roi, ctx, object_id=k, source=source)
        out.append(replace(obj, extent_along_m=t.along, extent_across_m=t.across, feature_count=0))
    return out


def gen_survey(scenario: SurveyScenario) -> tuple[list[SonarPing], list[GeoObject]]:
    """Pings in recording order (all channels of ping 0, then ping 1, ...) and the truth list."""
    infos = channel_infos(scenario)
    pings = []
    for i in range(scenario.ping_count):
        nav = track_fix(scenario, i)
        ts = ping_time(scenario, i)
        for info in infos:
            pings.append(SonarPing(
                ping_number=i, timestamp=ts, channel=info,
                samples=ping_samples(scenario, i, info.side),
                slant_range_max=scenario.slant_range_max, sound_velocity=scenario.sound_velocity,
                sensor_altitude=scenario.altitude, nav=nav,
            ))
    return pings, truth_objects(scenario)


def truth_path(xtf_path) -> Path:
    p = Path(xtf_path)
    return p.with_name(p.stem + ".truth.geojson")


def write_xtf(pings: Sequence[SonarPing], path, scenario: SurveyScenario | None = None,
              truth: Sequence[GeoObject] | None = None) -> Path:
    """Write pings as XTF and, when a truth list is given, its GeoJSON sidecar."""
    header = header_for(pings, channel_infos(scenario)) if scenario is not None else None
    if header is None and not pings:
        raise ScenarioError("cannot infer a channel layout from zero pings; pass the scenario")
    _write_xtf(pings, path, header)
    if truth is not None:
        truth_path(path).write_text(catalog_geojson(truth), encoding="utf-8")
    return Path(path)


def read_truth(xtf_path) -> list[GeoObject]:
    return read_catalog(truth_path(xtf_path))


def write_survey(scenario: SurveyScenario, path) -> tuple[Path, list[GeoObject]]:
    pings, truth = gen_survey(scenario)
    write_xtf(pings, path, scenario, truth)
    return Path(path), truth


# --- scenario files -------------------------------------------------------

_SCALARS = {
    "seed": int, "ping_count": int, "samples_per_ping": int, "slant_range_max": float,
    "altitude": float, "sound_velocity": float, "sigma": float, "floor": float,
    "bytes_per_sample": int,
}
_TRACK = {"latitude": float, "longitude": float, "heading": float, "speed": float, "ping_rate": float}
_TARGET = {"shape": Shape, "ping_index": float, "ground_range": float, "side": Side, "along": float,
           "across": float, "gain": float, "shadow_length": float, "rope_width": float}


def _convert(section: str, key: str, raw: str, kind):
    try:
        return kind(raw.strip())
    except (ValueError, KeyError) as exc:
        raise ScenarioError(f"[{section}] {key}: invalid value {raw!r}") from exc


def scenario_from_ini(text: str) -> SurveyScenario:
    """Parse a scenario file: [survey], [track] and one [target.NAME] section per target."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    kwargs, track, targets = {}, {}, []
    for section in cp.sections():
        items = dict(cp.items(section))
        if section == "survey":
            for k, v in items.items():
                if k == "sides":
                    kwargs["sides"] = tuple(_convert(section, k, s, Side) for s in v.split(","))
                elif k in _SCALARS:
                    kwargs[k] = _convert(section, k, v, _SCALARS[k])
                else:
                    raise ScenarioError(f"[survey] unknown key {k!r}")
        elif section == "track":
            for k, v in items.items():
                if k == "start":
                    track[k] = _convert(section, k, v, lambda s: datetime.fromisoformat(s.replace("Z", "+00:00")))
                elif k in _TRACK:
                    track[k] = _convert(section, k, v, _TRACK[k])
                else:
                    raise ScenarioError(f"[track] unknown key {k!r}")
        elif section.startswith("target"):
            spec = {}
            for k, v in items.items():
                if k not in _TARGET:
                    raise ScenarioError(f"[{section}] unknown key {k!r}")
                spec[k] = _convert(section, k, v, _TARGET[k])
            missing = {"shape", "ping_index", "ground_range", "side", "along", "across"} - set(spec)
            if missing:
                raise ScenarioError(f"[{section}] missing {', '.join(sorted(missing))}")
            targets.append(TargetSpec(**spec))
        else:
            raise ScenarioError(f"unknown section [{section}]")
    return SurveyScenario(track=Track(**track), targets=tuple(targets), **kwargs)


def scenario_to_ini(s: SurveyScenario) -> str:
    lines = ["[survey]"]
    for k in _SCALARS:
        lines.append(f"{k} = {getattr(s, k)}")
    lines.append("sides = " + ",".join(side.value for side in s.sides))
    lines += ["", "[track]"]
    for k in _TRACK:
        lines.append(f"{k} = {getattr(s.track, k)}")
    lines.append(f"start = {s.track.start.isoformat()}")
    for i, t in enumerate(s.targets):
        lines += ["", f"[target.{i}]"]
        for k in _TARGET:
            v = getattr(t, k)
            lines.append(f"{k} = {v.value if isinstance(v, enum.Enum) else v}")
    return "\n".join(lines) + "\n"


def load_scenario(path) -> SurveyScenario:
    return scenario_from_ini(Path(path).read_text(encoding="utf-8"))


def acceptance_scenario(seed: int = 0, ping_count: int = 2000) -> SurveyScenario:
    """Ten targets of 3-10 m, gain 3-5, shadows of 5-6 m, alternating sides, 2000 pings."""
    shapes = [Shape.RECT, Shape.ELLIPSE, Shape.RECT, Shape.LINE_ROPE, Shape.ELLIPSE,
              Shape.RECT, Shape.ELLIPSE, Shape.RECT, Shape.LINE_ROPE, Shape.RECT]
    sizes = [(3, 3), (5, 4), (10, 6), (8, 4), (6, 8), (4, 5), (7, 7), (5, 10), (10, 5), (9, 9)]
    ranges = [30, 55, 80, 40, 100, 65, 35, 90, 50, 75]
    gains = [3.0, 4.0, 3.5, 5.0, 3.0, 4.5, 3.0, 4.0, 5.0, 3.5]
    shadows = [5, 6, 6, 5, 6, 5, 6, 6, 5, 6]
    spacing = (ping_count - 200) / 9
    targets = []
    for i in range(10):
        targets.append(TargetSpec(
            shape=shapes[i], ping_index=100 + i * spacing, ground_range=ranges[i],
            side=Side.PORT if i % 2 == 0 else Side.STARBOARD,
            along=sizes[i][0], across=sizes[i][1], gain=gains[i], shadow_length=shadows[i],
        ))
    return SurveyScenario(seed=seed, ping_count=ping_count, targets=tuple(targets))


__all__ = [
    "ScenarioError", "Shape", "SurveyScenario", "TargetSpec", "Track", "acceptance_scenario",
    "gen_survey", "ground_row", "ground_to_slant", "load_scenario", "ping_samples", "read_truth",
    "scenario_from_ini", "scenario_to_ini", "target_masks", "truth_objects", "truth_path",
    "write_survey", "write_xtf",
]
