"""FAST segment-test corner detector.

A pixel ``p`` is a corner when at least ``arc_len`` contiguous pixels of
the 16-pixel radius-3 Bresenham circle are all brighter than ``p + t`` or
all darker than ``p - t``.  The score is the largest threshold for which
the test still passes.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# (drow, dcol), clockwise from the top
CIRCLE = np.array([
    (-3, 0), (-3, 1), (-2, 2), (-1, 3), (0, 3), (1, 3), (2, 2), (3, 1),
    (3, 0), (3, -1), (2, -2), (1, -3), (0, -3), (-1, -3), (-2, -2), (-3, -1),
])
RADIUS = 3
_COMPASS = (0, 4, 8, 12)
# earlier neighbours in (row, col) order win score ties
_NEIGHBOURS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]


def _empty():
    return np.empty(0, np.intp), np.empty(0, np.intp), np.empty(0, np.int32)


def segment_test(pixels: np.ndarray, t: int = 20, arc_len: int = 9):
    """All pixels passing the segment test, before non-maximum suppression.

    Returns ``(rows, cols, scores)`` in row-major order.
    """
    if t < 1:
        raise ValueError("FAST threshold must be >= 1")
    if not 9 <= arc_len <= 16:
        raise ValueError("arc_len must be within [9, 16]")
    img = np.asarray(pixels, dtype=np.int16)
    h, w = img.shape
    if h < 2 * RADIUS + 1 or w < 2 * RADIUS + 1:
        return _empty()
    center = img[RADIUS:h - RADIUS, RADIUS:w - RADIUS]
    ring = [img[RADIUS + dr:h - RADIUS + dr, RADIUS + dc:w - RADIUS + dc] for dr, dc in CIRCLE]

    # rejection pretest on the four compass pixels; any arc of L covers >= L // 4 of them
    need = arc_len // 4
    hi = center + t
    lo = center - t
    n_bright = sum((ring[k] > hi).view(np.int8) for k in _COMPASS)
    n_dark = sum((ring[k] < lo).view(np.int8) for k in _COMPASS)
    cr, cc = np.nonzero((n_bright >= need) | (n_dark >= need))
    if cr.size == 0:
        return _empty()

    p = center[cr, cc]
    vals = np.stack([r[cr, cc] for r in ring])
    best = np.maximum(_best_arc_min(vals - p, arc_len), _best_arc_min(p - vals, arc_len))
    ok = best > t
    return cr[ok] + RADIUS, cc[ok] + RADIUS, (best[ok] - 1).astype(np.int32)


def _best_arc_min(diff: np.ndarray, arc_len: int) -> np.ndarray:
    # max over the 16 arc starts of the min difference along the arc
    ext = np.concatenate([diff, diff[: arc_len - 1]])
    return sliding_window_view(ext, arc_len, axis=0).min(axis=-1).max(axis=0)


def nonmax_suppression(rows: np.ndarray, cols: np.ndarray, scores: np.ndarray,
                       shape: tuple[int, int]) -> np.ndarray:
    """Boolean keep-mask for 3x3 non-maximum suppression on corner scores."""
    if rows.size == 0:
        return np.zeros(0, dtype=bool)
    h, w = shape
    grid = np.zeros((h + 2, w + 2), dtype=np.int32)
    grid[rows + 1, cols + 1] = scores
    keep = np.ones(rows.size, dtype=bool)
    for dr, dc in _NEIGHBOURS:
        other = grid[rows + 1 + dr, cols + 1 + dc]
        keep &= other <= scores
        if (dr, dc) < (0, 0):
            keep &= other != scores
    return keep


def fast_corners(pixels: np.ndarray, t: int = 20, arc_len: int = 9, nms: bool = True):
    rows, cols, scores = segment_test(pixels, t, arc_len)
    if nms:
        keep = nonmax_suppression(rows, cols, scores, np.shape(pixels))
        rows, cols, scores = rows[keep], cols[keep], scores[keep]
    return rows, cols, scores
