"""Density clustering of feature clouds into padded regions of interest."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .features import Detector, FeatureCloud, FeaturePoint
from .xtf import Side

NOISE = -1


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 40.0
    min_pts: int = 5

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


def _neighbor_pairs(pts: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """All ordered pairs (i, j), i != j, with distance <= eps, via a grid of cell size eps."""
    n = len(pts)
    cells = np.floor(pts / eps).astype(np.int64)
    cells -= cells.min(axis=0)
    ncols = int(cells[:, 1].max()) + 3
    key = (cells[:, 0] + 1) * ncols + (cells[:, 1] + 1)
    order = np.argsort(key, kind="stable")
    skey = key[order]
    eps2 = eps * eps
    src, dst = [], []
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            target = key + dr * ncols + dc
            lo = np.searchsorted(skey, target, side="left")
            hi = np.searchsorted(skey, target, side="right")
            counts = hi - lo
            total = int(counts.sum())
            if total == 0:
                continue
            i = np.repeat(np.arange(n), counts)
            start = np.repeat(lo - np.cumsum(counts) + counts, counts)
            j = order[start + np.arange(total)]
            d = pts[i] - pts[j]
            ok = (np.einsum("ij,ij->i", d, d) <= eps2) & (i != j)
            src.append(i[ok])
            dst.append(j[ok])
    if not src:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(src), np.concatenate(dst)


def dbscan(points, params: DbscanParams = DbscanParams()) -> np.ndarray:
    """Label each point with a cluster id (0, 1, ...) or ``NOISE``.

    Core points have at least ``min_pts`` points within ``eps`` (themselves
    included).  Clusters are numbered in the order their first core point
    appears when scanning points sorted by (row, col); a border point goes
    to the lowest-numbered cluster holding one of its core neighbours.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    src, dst = _neighbor_pairs(pts, params.eps)
    core = np.bincount(src, minlength=n) + 1 >= params.min_pts
    if not core.any():
        return labels

    both = core[src] & core[dst]
    graph = coo_matrix((np.ones(int(both.sum()), np.int8), (src[both], dst[both])), shape=(n, n))
    _, comp = connected_components(graph, directed=False)

    scan = np.lexsort((pts[:, 1], pts[:, 0]))
    rank = np.empty(n, np.int64)
    rank[scan] = np.arange(n)
    core_idx = np.flatnonzero(core)
    first_rank = np.full(comp.max() + 1, np.iinfo(np.int64).max)
    np.minimum.at(first_rank, comp[core_idx], rank[core_idx])
    used = np.unique(comp[core_idx])
    cluster_of_comp = np.full(comp.max() + 1, NOISE, np.int64)
    cluster_of_comp[used[np.argsort(first_rank[used], kind="stable")]] = np.arange(used.size)
    labels[core] = cluster_of_comp[comp[core]]

    border = ~core[src] & core[dst]
    if border.any():
        best = np.full(n, np.iinfo(np.int64).max)
        np.minimum.at(best, src[border], labels[dst[border]])
        claimed = best != np.iinfo(np.int64).max
        labels[claimed] = best[claimed]
    return labels


@dataclass(frozen=True, eq=False)
class RegionOfInterest:
    cluster_id: int
    member_points: tuple[FeaturePoint, ...]
    centroid: tuple[float, float]
    bbox: tuple[int, int, int, int]  # row_min, col_min, row_max, col_max (inclusive)
    padding_applied: int
    bounds: tuple[int, int, int, int]  # clamp box, same layout as bbox
    channel_side: Side | None = None
    ground_range_per_col: float | None = None

    @property
    def feature_count(self) -> int:
        return len(self.member_points)

    @property
    def area(self) -> int:
        r0, c0, r1, c1 = self.bbox
        return (r1 - r0 + 1) * (c1 - c0 + 1)

    def translated(self, drow: int, dcol: int = 0) -> "RegionOfInterest":
        r0, c0, r1, c1 = self.bbox
        b0, b1, b2, b3 = self.bounds
        return replace(
            self,
            member_points=tuple(replace(p, row=p.row + drow, col=p.col + dcol) for p in self.member_points),
            centroid=(self.centroid[0] + drow, self.centroid[1] + dcol),
            bbox=(r0 + drow, c0 + dcol, r1 + drow, c1 + dcol),
            bounds=(b0 + drow, b1 + dcol, b2 + drow, b3 + dcol),
        )


def _make_roi(cluster_id, members, padding, bounds, **extra) -> RegionOfInterest:
    rows = np.array([p.row for p in members])
    cols = np.array([p.col for p in members])
    b0, b1, b2, b3 = bounds
    bbox = (
        max(int(rows.min()) - padding, b0),
        max(int(cols.min()) - padding, b1),
        min(int(rows.max()) + padding, b2),
        min(int(cols.max()) + padding, b3),
    )
    return RegionOfInterest(cluster_id, tuple(members), (float(rows.mean()), float(cols.mean())),
                            bbox, padding, bounds, **extra)


def clusters_to_rois(points, labels: np.ndarray, padding: int = 20,
                     tile_shape: tuple[int, int] | None = None, **extra) -> list[RegionOfInterest]:
    """One padded, clamped ROI per non-noise cluster label."""
    if isinstance(points, FeatureCloud):
        points = points.points()
    points = [p if isinstance(p, FeaturePoint) else FeaturePoint(int(p[0]), int(p[1]), Detector.FAST)
              for p in points]
    labels = np.asarray(labels)
    if tile_shape is None:
        big = np.iinfo(np.int32).max
        bounds = (0, 0, big, big)
    else:
        bounds = (0, 0, tile_shape[0] - 1, tile_shape[1] - 1)
    rois = []
    for cid in np.unique(labels[labels != NOISE]):
        members = [points[i] for i in np.flatnonzero(labels == cid)]
        rois.append(_make_roi(int(cid), members, padding, bounds, **extra))
    return rois


def bbox_intersection(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> int:
    rows = min(a[2], b[2]) - max(a[0], b[0]) + 1
    cols = min(a[3], b[3]) - max(a[1], b[1]) + 1
    return rows * cols if rows > 0 and cols > 0 else 0


def bbox_iou(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> float:
    r0, c0 = max(a[0], b[0]), max(a[1], b[1])
    r1, c1 = min(a[2], b[2]), min(a[3], b[3])
    if r1 < r0 or c1 < c0:
        return 0.0
    inter = (r1 - r0 + 1) * (c1 - c0 + 1)
    area_a = (a[2] - a[0] + 1) * (a[3] - a[1] + 1)
    area_b = (b[2] - b[0] + 1) * (b[3] - b[1] + 1)
    return inter / (area_a + area_b - inter)


def merge_group(group: Sequence[RegionOfInterest]) -> RegionOfInterest:
    """One ROI from the union of the members of several (duplicates dropped)."""
    if len(group) == 1:
        return group[0]
    seen = {}
    for roi in group:
        for p in roi.member_points:
            seen.setdefault((p.row, p.col, p.detector), p)
    members = sorted(seen.values(), key=lambda p: (p.row, p.col, int(p.detector)))
    bounds = (
        min(r.bounds[0] for r in group), min(r.bounds[1] for r in group),
        max(r.bounds[2] for r in group), max(r.bounds[3] for r in group),
    )
    first = min(group, key=lambda r: (r.bbox[0], r.bbox[1], r.cluster_id))
    return _make_roi(min(r.cluster_id for r in group), members, first.padding_applied, bounds,
                     channel_side=first.channel_side, ground_range_per_col=first.ground_range_per_col)


def _merge_once(rois: list[RegionOfInterest], iou_threshold: float) -> list[RegionOfInterest]:
    n = len(rois)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if rois[i].channel_side != rois[j].channel_side:
                continue
            if bbox_iou(rois[i].bbox, rois[j].bbox) > iou_threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[RegionOfInterest]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(rois[i])
    return [merge_group(g) for _, g in sorted(groups.items())]


def merge_rois(rois: Sequence[RegionOfInterest], iou_threshold: float = 0.3) -> list[RegionOfInterest]:
    """Transitively merge ROIs whose boxes overlap with IoU above the threshold.

    Merging repeats until no pair qualifies, so the result is a fixed point.
    Only ROIs of the same channel are merged.
    """
    current = list(rois)
    while True:
        merged = _merge_once(current, iou_threshold)
        if len(merged) == len(current):
            return merged
        current = merged


def cluster_cloud(cloud: FeatureCloud, params: DbscanParams, padding: int,
                  tile_shape: tuple[int, int], **extra) -> tuple[list[RegionOfInterest], np.ndarray]:
    if len(cloud) == 0:
        return [], np.empty(0, np.int64)
    labels = dbscan(cloud.coords, params)
    return clusters_to_rois(cloud.points(), labels, padding, tile_shape, **extra), labels
