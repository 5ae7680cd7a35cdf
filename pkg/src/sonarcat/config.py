"""Pipeline configuration: one INI file, every tunable with a validated default."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path

from .clustering import DbscanParams
from .features import FeatureConfig, MserParams
from .georef import Layback
from .xtf import Side


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


# section.key -> (attribute, type, check, description of the valid range)
_SCHEMA = {
    "fast.threshold": ("fast_threshold", int, lambda v: 1 <= v <= 254, "integer in 1..254"),
    "fast.arc_len": ("fast_arc_len", int, lambda v: 9 <= v <= 16, "integer in 9..16"),
    "mser.delta": ("mser_delta", int, lambda v: 1 <= v <= 127, "integer in 1..127"),
    "mser.min_area": ("mser_min_area", int, _positive, "integer > 0"),
    "mser.max_area_frac": ("mser_max_area_frac", float, lambda v: 0 < v <= 1, "real in (0, 1]"),
    "mser.max_variation": ("mser_max_variation", float, _nonneg, "real >= 0"),
    "dbscan.eps": ("dbscan_eps", float, _positive, "real > 0"),
    "dbscan.min_pts": ("dbscan_min_pts", int, lambda v: v >= 1, "integer >= 1"),
    "roi.padding": ("roi_padding", int, _nonneg, "integer >= 0"),
    "roi.merge_iou": ("roi_merge_iou", float, lambda v: 0 <= v < 1, "real in [0, 1)"),
    "tile.rows": ("tile_rows", int, lambda v: v >= 2, "integer >= 2"),
    "tile.overlap": ("tile_overlap", int, _nonneg, "integer >= 0"),
    "tile.equalize": ("equalize", bool, None, "true or false"),
    "georef.layback_along": ("layback_along", float, None, "real (metres)"),
    "georef.layback_across": ("layback_across", float, None, "real (metres)"),
    "pipeline.channels": ("channels", tuple, None, "all, or a list of port, starboard"),
    "pipeline.detectors": ("detectors", tuple, None, "non-empty list of fast, mser"),
    "pipeline.workers": ("workers", int, lambda v: 1 <= v <= 64, "integer in 1..64"),
}

DETECTORS = ("fast", "mser")
CHANNELS = ("port", "starboard")


@dataclass(frozen=True)
class PipelineConfig:
    # detector defaults tuned on equalized synthetic speckle; see README
    fast_threshold: int = 190
    fast_arc_len: int = 9
    mser_delta: int = 15
    mser_min_area: int = 60
    mser_max_area_frac: float = 0.05
    mser_max_variation: float = 0.1
    dbscan_eps: float = 40.0
    dbscan_min_pts: int = 5
    roi_padding: int = 20
    roi_merge_iou: float = 0.3
    tile_rows: int = 512
    tile_overlap: int = 128
    equalize: bool = True
    layback_along: float = 0.0
    layback_across: float = 0.0
    channels: tuple[str, ...] = CHANNELS
    detectors: tuple[str, ...] = DETECTORS
    workers: int = 1

    def __post_init__(self):
        for key, (attr, kind, check, desc) in _SCHEMA.items():
            value = getattr(self, attr)
            if kind is tuple:
                continue
            if kind is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
                object.__setattr__(self, attr, value)
            if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
                raise ConfigError(key, f"expected {desc}, got {value!r}")
            if check is not None and not check(value):
                raise ConfigError(key, f"expected {desc}, got {value!r}")
        if self.tile_overlap >= self.tile_rows:
            raise ConfigError("tile.overlap", "must be smaller than tile.rows")
        chans = tuple(self.channels)
        if not chans or any(c not in CHANNELS for c in chans) or len(set(chans)) != len(chans):
            raise ConfigError("pipeline.channels", f"expected a list of {', '.join(CHANNELS)}, got {chans!r}")
        object.__setattr__(self, "channels", chans)
        dets = tuple(self.detectors)
        if not dets or any(d not in DETECTORS for d in dets) or len(set(dets)) != len(dets):
            raise ConfigError("pipeline.detectors", f"expected a list of {', '.join(DETECTORS)}, got {dets!r}")
        object.__setattr__(self, "detectors", dets)

    @property
    def sides(self) -> tuple[Side, ...]:
        return tuple(Side(c) for c in self.channels)

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            fast_threshold=self.fast_threshold,
            arc_len=self.fast_arc_len,
            mser=MserParams(delta=self.mser_delta, min_area=self.mser_min_area,
                            max_variation=self.mser_max_variation, max_area_frac=self.mser_max_area_frac),
            use_fast="fast" in self.detectors,
            use_mser="mser" in self.detectors,
        )

    def dbscan_params(self) -> DbscanParams:
        return DbscanParams(self.dbscan_eps, self.dbscan_min_pts)

    def layback(self) -> Layback:
        return Layback(self.layback_along, self.layback_across)

    def with_overrides(self, **kw) -> "PipelineConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(kw)
        return PipelineConfig(**values)


def _parse_value(key: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if kind is tuple:
            items = tuple(s.strip() for s in raw.split(",") if s.strip())
            if key == "pipeline.channels" and items == ("all",):
                return CHANNELS
            return items
        return kind(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r}, expected {_SCHEMA[key][3]}") from None


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Read an INI document over ``base`` (defaults when omitted); unknown keys are rejected."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    values = {}
    for section in cp.sections():
        for name, raw in cp.items(section):
            key = f"{section}.{name}"
            if key not in _SCHEMA:
                raise ConfigError(key, "unknown configuration key")
            attr, kind, _, _ = _SCHEMA[key]
            values[attr] = _parse_value(key, raw, kind)
    return (base or PipelineConfig()).with_overrides(**values)


def load_config(path) -> PipelineConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def dump_config(cfg: PipelineConfig) -> str:
    sections: dict[str, list[str]] = {}
    for key, (attr, kind, _, _) in _SCHEMA.items():
        section, name = key.split(".")
        value = getattr(cfg, attr)
        if kind is tuple:
            text = ", ".join(value)
        elif kind is bool:
            text = "true" if value else "false"
        else:
            text = repr(value)
        sections.setdefault(section, []).append(f"{name} = {text}")
    return "\n".join(f"[{s}]\n" + "\n".join(lines) + "\n" for s, lines in sections.items())
