"""Feature point clouds: FAST corners plus MSER region centroids."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .fast import fast_corners, nonmax_suppression, segment_test
from .mser import (POLARITY_MINUS, POLARITY_PLUS, MserParams, MserRegion, mser_centroids,
                   mser_detect, mser_regions)


class Detector(enum.IntEnum):
    FAST = 0
    MSER_PLUS = 1
    MSER_MINUS = 2


@dataclass(frozen=True)
class FeaturePoint:
    row: int
    col: int
    detector: Detector
    score: float = 0.0


@dataclass(frozen=True)
class FeatureConfig:
    fast_threshold: int = 20
    arc_len: int = 9
    mser: MserParams = field(default_factory=MserParams)
    use_fast: bool = True
    use_mser: bool = True


@dataclass(frozen=True, eq=False)
class FeatureCloud:
    """Column-oriented feature cloud; cheap to build, ship and cluster."""

    rows: np.ndarray
    cols: np.ndarray
    detector: np.ndarray
    score: np.ndarray

    def __len__(self):
        return self.rows.size

    @property
    def coords(self) -> np.ndarray:
        return np.stack([self.rows, self.cols], axis=1).astype(np.float64)

    def points(self) -> list[FeaturePoint]:
        return [FeaturePoint(int(r), int(c), Detector(int(d)), float(s))
                for r, c, d, s in zip(self.rows, self.cols, self.detector, self.score)]

    @classmethod
    def from_points(cls, points: Iterable[FeaturePoint]) -> "FeatureCloud":
        pts = list(points)
        return cls(
            np.array([p.row for p in pts], dtype=np.int64),
            np.array([p.col for p in pts], dtype=np.int64),
            np.array([int(p.detector) for p in pts], dtype=np.int8),
            np.array([p.score for p in pts], dtype=np.float64),
        )


def _pixels(tile):
    return tile.pixels if hasattr(tile, "pixels") else np.asarray(tile)


def fast_detect(tile, t: int = 20, arc_len: int = 9) -> list[FeaturePoint]:
    rows, cols, scores = fast_corners(_pixels(tile), t, arc_len)
    return [FeaturePoint(int(r), int(c), Detector.FAST, float(s)) for r, c, s in zip(rows, cols, scores)]


def region_centroid(region, detector: Detector = Detector.MSER_MINUS, score: float = 0.0) -> FeaturePoint:
    """Mean member coordinate, rounded half up to the nearest pixel."""
    px = np.asarray(list(region) if isinstance(region, (set, frozenset)) else region, dtype=np.float64)
    if px.size == 0:
        raise ValueError("region is empty")
    r, c = np.floor(px.reshape(-1, 2).mean(axis=0) + 0.5)
    return FeaturePoint(int(r), int(c), detector, score)


def detect_cloud(tile, config: FeatureConfig = FeatureConfig()) -> FeatureCloud:
    pixels = _pixels(tile)
    parts = []
    if config.use_fast:
        r, c, s = fast_corners(pixels, config.fast_threshold, config.arc_len)
        parts.append((r, c, np.full(r.size, Detector.FAST, np.int8), s.astype(np.float64)))
    if config.use_mser:
        for polarity, det in ((POLARITY_MINUS, Detector.MSER_MINUS), (POLARITY_PLUS, Detector.MSER_PLUS)):
            r, c, s = mser_centroids(pixels, config.mser, polarity)
            parts.append((r, c, np.full(r.size, det, np.int8), s))
    if not parts:
        return FeatureCloud(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int8), np.empty(0))
    return FeatureCloud(*(np.concatenate([p[i] for p in parts]) for i in range(4)))


def detect_features(tile, config: FeatureConfig = FeatureConfig()) -> list[FeaturePoint]:
    """FAST corners followed by one centroid per MSER- and MSER+ region."""
    return detect_cloud(tile, config).points()


__all__ = [
    "Detector", "FeatureCloud", "FeatureConfig", "FeaturePoint", "MserParams", "MserRegion",
    "POLARITY_MINUS", "POLARITY_PLUS", "detect_cloud", "detect_features", "fast_corners",
    "fast_detect", "mser_centroids", "mser_detect", "mser_regions", "nonmax_suppression",
    "region_centroid", "segment_test",
]
