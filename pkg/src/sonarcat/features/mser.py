"""Maximally stable extremal regions via a union-find component tree.

Pixels are flooded in increasing intensity order; 4-connected components
of each lower level set ``{I <= i}`` form a tree.  A tree node stands for
one pixel set, valid over the levels ``[level, parent.level)``.  Its
variation is

    q(i) = (|R(i + delta)| - |R(i - delta)|) / |R(i)|

minimised over the node's level span, with ``R(i - delta)`` following the
largest child.  A node is maximally stable when its variation is no larger
than its parent's and its largest child's.

Dark regions (MSER-) come from the image itself, bright regions (MSER+)
from its inversion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

POLARITY_MINUS = "minus"
POLARITY_PLUS = "plus"


@dataclass(frozen=True)
class MserParams:
    delta: int = 5
    min_area: int = 30
    max_area: int | None = None  # None: max_area_frac of the image area
    max_variation: float = 0.5
    max_area_frac: float = 0.01

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.min_area < 1:
            raise ValueError("min_area must be >= 1")
        if self.max_area is not None and self.max_area <= self.min_area:
            raise ValueError("max_area must exceed min_area")
        if not 0.0 < self.max_area_frac <= 1.0:
            raise ValueError("max_area_frac must be in (0, 1]")

    def resolved_max_area(self, image_area: int) -> int:
        if self.max_area is not None:
            return self.max_area
        return max(self.min_area + 1, int(self.max_area_frac * image_area))


@dataclass(frozen=True, eq=False)
class MserRegion:
    pixels: np.ndarray  # (k, 2) row, col
    polarity: str
    stability: float
    level: int

    @property
    def area(self) -> int:
        return len(self.pixels)

    def pixel_set(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in self.pixels}


@numba.njit(cache=True)
def _find(uf, x):
    while uf[x] != x:
        uf[x] = uf[uf[x]]
        x = uf[x]
    return x


@numba.njit(cache=True)
def _resolve(parent, dead, x):
    root = x
    while dead[root]:
        root = parent[root]
    while dead[x]:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def _component_tree(img, order, width):
    n = img.size
    uf = np.full(n, -1, np.int64)
    size = np.zeros(n, np.int64)
    comp_node = np.empty(n, np.int64)
    level = np.empty(n, np.int32)
    area = np.empty(n, np.int64)
    parent = np.full(n, -1, np.int64)
    dead = np.zeros(n, np.bool_)
    height = n // width
    for node in range(n):
        p = order[node]
        lv = img[p]
        uf[p] = p
        size[p] = 1
        level[node] = lv
        area[node] = 1
        comp_node[p] = node
        r = p // width
        c = p - r * width
        for k in range(4):
            if k == 0:
                if r == 0:
                    continue
                q = p - width
            elif k == 1:
                if c == 0:
                    continue
                q = p - 1
            elif k == 2:
                if c == width - 1:
                    continue
                q = p + 1
            else:
                if r == height - 1:
                    continue
                q = p + width
            if uf[q] < 0:
                continue
            rp = _find(uf, p)
            rq = _find(uf, q)
            if rp == rq:
                continue
            n_p = comp_node[rp]
            n_q = comp_node[rq]
            parent[n_q] = n_p
            area[n_p] += area[n_q]
            if level[n_q] == lv:
                dead[n_q] = True
            if size[rp] < size[rq]:
                rp, rq = rq, rp
            uf[rq] = rp
            size[rp] += size[rq]
            comp_node[rp] = n_p
    # node i was created for pixel order[i]; collapse same-level merges
    rparent = np.full(n, -1, np.int64)
    for x in range(n):
        if dead[x]:
            continue
        q = parent[x]
        if q != -1 and dead[q]:
            q = _resolve(parent, dead, q)
        rparent[x] = q
    pix_node = np.empty(n, np.int64)
    for node in range(n):
        pix_node[order[node]] = _resolve(parent, dead, node)
    return level, area, rparent, dead, pix_node


@numba.njit(cache=True)
def _select(level, area, rparent, dead, delta, min_area, max_area, max_var):
    n = level.size
    main_child = np.full(n, -1, np.int64)
    for x in range(n):
        if dead[x]:
            continue
        p = rparent[x]
        if p != -1:
            m = main_child[p]
            if m == -1 or area[x] > area[m]:
                main_child[p] = x
    need = np.zeros(n, np.bool_)
    for x in range(n):
        if dead[x] or area[x] < min_area:
            continue
        need[x] = True
        if main_child[x] != -1:
            need[main_child[x]] = True
        if rparent[x] != -1:
            need[rparent[x]] = True
    q = np.full(n, np.inf)
    for x in range(n):
        if not need[x]:
            continue
        lo = level[x]
        hi = level[rparent[x]] if rparent[x] != -1 else 256
        a = area[x]
        u = x
        best = np.inf
        for i in range(lo, hi):
            while rparent[u] != -1 and level[rparent[u]] <= i + delta:
                u = rparent[u]
            j = i - delta
            if j >= lo:
                down = a
            else:
                d = main_child[x]
                while d != -1 and level[d] > j:
                    d = main_child[d]
                down = area[d] if d != -1 else 0
            v = (area[u] - down) / a
            if v < best:
                best = v
        q[x] = best
    sel = np.zeros(n, np.bool_)
    for x in range(n):
        if dead[x] or area[x] < min_area or area[x] > max_area or q[x] > max_var:
            continue
        if rparent[x] != -1 and q[rparent[x]] < q[x]:
            continue
        if main_child[x] != -1 and q[main_child[x]] < q[x]:
            continue
        sel[x] = True
    return sel, q


@numba.njit(cache=True)
def _collect(sel, rparent, dead, pix_node, width, want_pixels):
    n = sel.size
    nsa = np.full(n, -1, np.int64)  # nearest selected ancestor, self included
    for x in range(n - 1, -1, -1):
        if dead[x]:
            continue
        if sel[x]:
            nsa[x] = x
        elif rparent[x] != -1:
            nsa[x] = nsa[rparent[x]]
    slot = np.full(n, -1, np.int64)
    nsel = 0
    for x in range(n):
        if sel[x]:
            slot[x] = nsel
            nsel += 1
    count = np.zeros(nsel, np.int64)
    sum_r = np.zeros(nsel, np.float64)
    sum_c = np.zeros(nsel, np.float64)
    for p in range(n):
        s = nsa[pix_node[p]]
        r = p // width
        c = p - r * width
        while s != -1:
            k = slot[s]
            count[k] += 1
            sum_r[k] += r
            sum_c[k] += c
            s = nsa[rparent[s]] if rparent[s] != -1 else -1
    offsets = np.zeros(nsel + 1, np.int64)
    for k in range(nsel):
        offsets[k + 1] = offsets[k] + count[k]
    if not want_pixels:
        return count, sum_r, sum_c, offsets, np.empty(0, np.int64)
    fill = offsets[:-1].copy()
    members = np.empty(offsets[nsel], np.int64)
    for p in range(n):
        s = nsa[pix_node[p]]
        while s != -1:
            k = slot[s]
            members[fill[k]] = p
            fill[k] += 1
            s = nsa[rparent[s]] if rparent[s] != -1 else -1
    return count, sum_r, sum_c, offsets, members


def _run(pixels: np.ndarray, params: MserParams, want_pixels: bool):
    img = np.ascontiguousarray(pixels, dtype=np.uint8)
    h, w = img.shape
    flat = img.ravel()
    order = np.argsort(flat, kind="stable")
    level, area, rparent, dead, pix_node = _component_tree(flat, order, w)
    sel, q = _select(level, area, rparent, dead, params.delta, params.min_area,
                     params.resolved_max_area(flat.size), params.max_variation)
    count, sum_r, sum_c, offsets, members = _collect(sel, rparent, dead, pix_node, w, want_pixels)
    nodes = np.flatnonzero(sel)
    return nodes, level, q, count, sum_r, sum_c, offsets, members


def _polarity_image(pixels: np.ndarray, polarity: str) -> np.ndarray:
    img = np.asarray(pixels, dtype=np.uint8)
    return img if polarity == POLARITY_MINUS else 255 - img


def mser_regions(pixels: np.ndarray, params: MserParams = MserParams(),
                 polarity: str = POLARITY_MINUS) -> list[MserRegion]:
    img = _polarity_image(pixels, polarity)
    if img.size == 0:
        return []
    w = img.shape[1]
    nodes, level, q, count, _, _, offsets, members = _run(img, params, True)
    regions = []
    for k, x in enumerate(nodes):
        idx = members[offsets[k]:offsets[k + 1]]
        px = np.stack([idx // w, idx % w], axis=1)
        regions.append(MserRegion(px, polarity, float(q[x]), int(level[x])))
    return regions


def mser_detect(pixels: np.ndarray, params: MserParams = MserParams()) -> list[MserRegion]:
    """Dark (MSER-) then bright (MSER+) maximally stable regions."""
    return mser_regions(pixels, params, POLARITY_MINUS) + mser_regions(pixels, params, POLARITY_PLUS)


def mser_centroids(pixels: np.ndarray, params: MserParams = MserParams(),
                   polarity: str = POLARITY_MINUS):
    """Rounded region centroids without materialising pixel lists.

    Returns ``(rows, cols, stability)`` arrays.
    """
    img = _polarity_image(pixels, polarity)
    if img.size == 0:
        return np.empty(0, np.intp), np.empty(0, np.intp), np.empty(0)
    nodes, _, q, count, sum_r, sum_c, _, _ = _run(img, params, False)
    rows = np.floor(sum_r / count + 0.5).astype(np.intp)
    cols = np.floor(sum_c / count + 0.5).astype(np.intp)
    return rows, cols, q[nodes]
