"""Waterfall synthesis: slant-range correction, equalization and tiling.

Each ping becomes one image row.  Sample ``i`` of a ping of ``n`` samples
sits at slant range ``i * slant_max / n``; after correction output bin
``k`` sits at ground range ``k * G / n`` with ``G = sqrt(slant_max**2 - h**2)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .xtf import Side, SonarPing

log = logging.getLogger(__name__)

DEFAULT_TILE_ROWS = 512
DEFAULT_OVERLAP_ROWS = 128


class WaterColumnSample(ValueError):
    """A slant range shorter than the altitude has no ground projection."""


class DegenerateGeometry(ValueError):
    pass


def slant_to_ground(d_slant: float, h: float) -> float:
    if h < 0:
        raise ValueError("altitude must be non-negative")
    if d_slant < h:
        raise WaterColumnSample(f"slant range {d_slant} m is inside the water column (h={h} m)")
    return math.sqrt(d_slant * d_slant - h * h)


def slant_from_twtt(c: float, t_twtt: float) -> float:
    if c <= 0:
        raise ValueError("sound speed must be positive")
    if t_twtt < 0:
        raise ValueError("two-way travel time must be non-negative")
    return c * t_twtt / 2.0


def depression_angle(tilt: float, roll: float | None = None, side: Side = Side.PORT) -> float:
    """Beam depression below horizontal, in degrees.

    Positive roll lowers the starboard side, so it steepens the starboard
    beam and flattens the port beam.
    """
    if roll is None:
        return tilt
    return tilt + roll if side is Side.STARBOARD else tilt - roll


def altitude_from_geometry(d_slant_first_return: float, tilt: float, roll: float | None = None,
                           side: Side = Side.PORT) -> float:
    theta = depression_angle(tilt, roll, side)
    if not 0.0 < theta < 90.0:
        raise DegenerateGeometry(f"depression angle {theta} deg outside (0, 90)")
    return d_slant_first_return * math.sin(math.radians(theta))


def first_return_index(samples: np.ndarray) -> int | None:
    """Index of the first bottom return: first sample above 3x the median of the leading 10%."""
    samples = np.asarray(samples, dtype=np.float64)
    lead = samples[: max(1, samples.size // 10)]
    threshold = 3.0 * float(np.median(lead))
    above = np.flatnonzero(samples > threshold)
    return int(above[0]) if above.size else None


@dataclass(frozen=True)
class SlantGeometry:
    h: float
    slant_max: float
    c: float = 1500.0
    n_samples: int = 0

    @property
    def degenerate(self) -> bool:
        return self.slant_max <= self.h

    @property
    def ground_extent(self) -> float:
        if self.degenerate:
            return 0.0
        return math.sqrt(self.slant_max ** 2 - self.h ** 2)

    @property
    def ground_range_per_col(self) -> float:
        return self.ground_extent / self.n_samples


@dataclass(frozen=True)
class AltitudeEstimate:
    h: float
    source: str  # "sensor", "geometry", "first_return" or "none"

    @property
    def low_confidence(self) -> bool:
        return self.source in ("first_return", "none")


def resolve_altitude(ping: SonarPing) -> AltitudeEstimate:
    """Pick the sonar altitude: sensor value, then tilt geometry, then first-return heuristic."""
    if ping.sensor_altitude is not None:
        return AltitudeEstimate(ping.sensor_altitude, "sensor")
    idx = first_return_index(ping.samples)
    if idx is None:
        return AltitudeEstimate(0.0, "none")
    d_first = idx * ping.slant_range_max / ping.samples.size
    if ping.tilt_angle is not None:
        try:
            h = altitude_from_geometry(d_first, ping.tilt_angle, ping.roll_angle, ping.channel.side)
            return AltitudeEstimate(h, "geometry")
        except DegenerateGeometry:
            pass
    return AltitudeEstimate(d_first, "first_return")


def scale_to_8bit(samples: np.ndarray) -> np.ndarray:
    """Samples as float intensities on the 0..255 scale; 16-bit data is scaled by 255/65535."""
    samples = np.asarray(samples)
    if samples.dtype == np.uint16:
        return samples.astype(np.float64) * (255.0 / 65535.0)
    return samples.astype(np.float64)


def _slant_index(n_out: int, grid_extent: float, h: float, slant_max: float, n_in: int) -> np.ndarray:
    # fractional input index per output bin; grid_extent == slant_max (h == 0) yields exact integers
    k = np.arange(n_out, dtype=np.float64)
    scale = (grid_extent / slant_max) * (n_in / n_out)
    offset = h * n_in / slant_max
    return np.sqrt((k * scale) ** 2 + offset * offset)


def correct_ping(samples: np.ndarray, geom: SlantGeometry, bin_width: float | None = None,
                 n_out: int | None = None) -> np.ndarray:
    """Resample one ping from slant range to ground range.

    Output bin ``k`` holds the linearly interpolated input at slant
    ``sqrt((k*w)**2 + h**2)``, ``w`` defaulting to ``G/n``.  Bins past the
    recorded slant range are zero.  A degenerate ping gives an all-zero row.
    """
    values = np.asarray(samples, dtype=np.float64)
    n_in = values.size
    if geom.n_samples and geom.n_samples != n_in:
        raise ValueError(f"ping has {n_in} samples, geometry expects {geom.n_samples}")
    n_out = n_in if n_out is None else n_out
    if geom.degenerate:
        return np.zeros(n_out)
    extent = geom.ground_extent if bin_width is None else bin_width * n_out
    idx = _slant_index(n_out, extent, geom.h, geom.slant_max, n_in)
    return _interp_rows(values[None, :], idx)[0]


def _interp_rows(rows: np.ndarray, idx: np.ndarray) -> np.ndarray:
    n_in = rows.shape[1]
    i0 = np.minimum(np.floor(idx).astype(np.intp), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = idx - i0
    frac[i0 == n_in - 1] = 0.0
    out = rows[:, i0] * (1.0 - frac) + rows[:, i1] * frac
    out[:, idx >= n_in] = 0.0
    return out


def equalize_image(pixels: np.ndarray) -> np.ndarray:
    """256-bin CDF histogram equalization of an 8-bit image.

    ``out(v) = round(255 * (cdf(v) - cdf_min) / (N - cdf_min))`` with round
    half up; a single-valued image is returned unchanged.
    """
    pixels = np.asarray(pixels, dtype=np.uint8)
    hist = np.bincount(pixels.ravel(), minlength=256).astype(np.int64)
    cdf = np.cumsum(hist)
    total = int(cdf[-1])
    cdf_min = int(hist[np.flatnonzero(hist)[0]]) if total else 0
    if total == cdf_min:
        return pixels.copy()
    denom = total - cdf_min
    num = 255 * np.maximum(cdf - cdf_min, 0)
    lut = ((2 * num + denom) // (2 * denom)).astype(np.uint8)
    return lut[pixels]


@dataclass(frozen=True, eq=False)
class WaterfallTile:
    channel_side: Side
    pixels: np.ndarray
    ping_index_of_row: np.ndarray
    ground_range_per_col: float
    tile_origin_row: int
    overlap_rows: int
    equalized: bool = False
    degenerate_rows: np.ndarray = field(default=None)
    low_confidence_rows: np.ndarray = field(default=None)

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.uint8)
        if px.ndim != 2:
            raise ValueError("tile pixels must be 2-D")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)
        pings = np.asarray(self.ping_index_of_row, dtype=np.int64)
        if pings.size != px.shape[0]:
            raise ValueError("one ping number per row required")
        if pings.size > 1 and np.any(np.diff(pings) <= 0):
            raise ValueError("tile rows must be in strictly increasing ping order")
        object.__setattr__(self, "ping_index_of_row", pings)
        if not self.ground_range_per_col > 0:
            raise ValueError("ground_range_per_col must be positive")
        for name in ("degenerate_rows", "low_confidence_rows"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, np.zeros(px.shape[0], dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @property
    def rows(self) -> int:
        return self.pixels.shape[0]

    @property
    def global_rows(self) -> np.ndarray:
        return np.arange(self.tile_origin_row, self.tile_origin_row + self.rows)


def equalize(tile: WaterfallTile) -> WaterfallTile:
    if tile.pixels.size == 0:
        raise ValueError("cannot equalize an empty tile")
    return WaterfallTile(
        channel_side=tile.channel_side,
        pixels=equalize_image(tile.pixels),
        ping_index_of_row=tile.ping_index_of_row,
        ground_range_per_col=tile.ground_range_per_col,
        tile_origin_row=tile.tile_origin_row,
        overlap_rows=tile.overlap_rows,
        equalized=True,
        degenerate_rows=tile.degenerate_rows,
        low_confidence_rows=tile.low_confidence_rows,
    )


@dataclass
class _Row:
    ping_number: int
    values: np.ndarray  # 0..255 float scale, slant order
    h: float
    slant_max: float
    low_confidence: bool


def correct_rows(rows: Sequence[_Row]) -> tuple[np.ndarray, float, np.ndarray]:
    """Slant-correct a block of rows onto one shared ground-range grid.

    The grid uses the widest ground extent in the block, so no row loses
    data; rows with a shorter extent are zero past their far edge.
    """
    n_out = max(r.values.size for r in rows)
    extents = [math.sqrt(r.slant_max ** 2 - r.h ** 2) if r.slant_max > r.h else 0.0 for r in rows]
    grid = max(extents)
    width = grid / n_out if grid > 0 else 1.0
    out = np.zeros((len(rows), n_out))
    degenerate = np.array([e == 0.0 for e in extents])
    groups: dict[tuple, list[int]] = {}
    for i, r in enumerate(rows):
        if not degenerate[i]:
            groups.setdefault((r.h, r.slant_max, r.values.size), []).append(i)
    for (h, smax, n_in), members in groups.items():
        idx = _slant_index(n_out, grid, h, smax, n_in)
        block = np.stack([rows[i].values for i in members])
        out[members] = _interp_rows(block, idx)
    return out, width, degenerate


def _quantize(values: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


class TileBuilder:
    """Incrementally stacks pings of one channel into overlapping tiles.

    ``push`` returns the tiles completed by that ping; ``flush`` emits the
    final partial tile.  Consecutive tiles share ``overlap_rows`` rows.
    """

    def __init__(self, channel_side: Side, tile_rows: int = DEFAULT_TILE_ROWS,
                 overlap_rows: int = DEFAULT_OVERLAP_ROWS, equalize: bool = True):
        if not tile_rows > overlap_rows >= 0:
            raise ValueError("need tile_rows > overlap_rows >= 0")
        self.channel_side = channel_side
        self.tile_rows = tile_rows
        self.overlap_rows = overlap_rows
        self.equalize = equalize
        self.stride = tile_rows - overlap_rows
        self.origin = 0  # global row of the next tile
        self.total_rows = 0
        self._covered = 0  # rows already inside an emitted tile
        self._buf: list[_Row] = []  # rows from self.origin onward
        self._last_ping: int | None = None
        self.dropped = 0

    def push(self, ping: SonarPing) -> list[WaterfallTile]:
        if self._last_ping is not None and ping.ping_number <= self._last_ping:
            self.dropped += 1
            log.warning("out_of_order_ping", extra={"event": "out_of_order_ping",
                                                    "ping_number": ping.ping_number})
            return []
        self._last_ping = ping.ping_number
        alt = resolve_altitude(ping)
        self._buf.append(_Row(ping.ping_number, scale_to_8bit(ping.samples), alt.h,
                              ping.slant_range_max, alt.low_confidence))
        self.total_rows += 1
        if len(self._buf) == self.tile_rows:
            return [self._emit(self.tile_rows)]
        return []

    def flush(self) -> list[WaterfallTile]:
        if self._buf and self.total_rows > self._covered:
            return [self._emit(len(self._buf))]
        return []

    def _emit(self, count: int) -> WaterfallTile:
        rows = self._buf[:count]
        values, width, degenerate = correct_rows(rows)
        tile = WaterfallTile(
            channel_side=self.channel_side,
            pixels=_quantize(values),
            ping_index_of_row=np.array([r.ping_number for r in rows]),
            ground_range_per_col=width,
            tile_origin_row=self.origin,
            overlap_rows=self.overlap_rows,
            degenerate_rows=degenerate,
            low_confidence_rows=np.array([r.low_confidence for r in rows]),
        )
        if self.equalize:
            tile = equalize(tile)
        self._covered = self.origin + count
        self._buf = self._buf[self.stride:]
        self.origin += self.stride
        return tile

    @property
    def next_origin(self) -> int:
        return self.origin


def build_tiles(pings: Iterable[SonarPing], channel: Side, tile_rows: int = DEFAULT_TILE_ROWS,
                overlap_rows: int = DEFAULT_OVERLAP_ROWS, equalize: bool = True) -> list[WaterfallTile]:
    builder = TileBuilder(channel, tile_rows, overlap_rows, equalize)
    tiles = []
    for p in pings:
        if p.channel.side is channel:
            tiles.extend(builder.push(p))
    tiles.extend(builder.flush())
    return tiles


def iter_tiles(pings: Iterable[SonarPing], channel: Side, **kwargs) -> Iterator[WaterfallTile]:
    builder = TileBuilder(channel, **kwargs)
    for p in pings:
        if p.channel.side is channel:
            yield from builder.push(p)
    yield from builder.flush()
