"""Streaming detection engine: pings in, georeferenced objects out.

Per channel, pings are stacked into overlapping tiles.  Each completed
tile is turned into a feature cloud, clustered, and its ROIs are moved to
global row coordinates and merged with the ROIs still pending.  A pending
ROI is final once it ends above the first row of the next tile, since no
later tile can overlap it; it is then georeferenced and emitted.

Tiles overlap, so an object cut by one tile's edge is usually seen whole
by the neighbouring tile, and the partial view would not pass the IoU test
against the whole one.  A cluster whose features come within
``edge_margin`` rows of an edge shared with a neighbour is therefore "cut":
it is folded into the neighbour's ROI it intersects most, and kept on its
own only when nothing intersects it.  Clusters cut by the bottom edge wait
for the next tile before this is decided.

File and stream input go through the same engine, so the catalog depends
only on the ping sequence, not on how it was delivered.
"""

from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

from .clustering import RegionOfInterest, bbox_intersection, cluster_cloud, merge_group, merge_rois
from .config import PipelineConfig
from .features import FeatureCloud, detect_cloud
from .georef import GeoObject, NavTrack, PixelGeoContext, roi_to_object
from .waterfall import TileBuilder, WaterfallTile
from .xtf import Side, SonarPing

log = logging.getLogger(__name__)


@dataclass
class TileResult:
    tile: WaterfallTile
    cloud: FeatureCloud
    labels: np.ndarray
    rois: list[RegionOfInterest]  # tile coordinates


def process_tile(tile: WaterfallTile, config: PipelineConfig) -> TileResult:
    """Features, clustering and ROIs of one tile; pure, so it can run in a worker."""
    cloud = detect_cloud(tile, config.feature_config())
    rois, labels = cluster_cloud(cloud, config.dbscan_params(), config.roi_padding, tile.shape,
                                 channel_side=tile.channel_side,
                                 ground_range_per_col=tile.ground_range_per_col)
    return TileResult(tile, cloud, labels, rois)


@dataclass
class _Channel:
    side: Side
    builder: TileBuilder
    nav: NavTrack = field(default_factory=NavTrack)
    pending: list[RegionOfInterest] = field(default_factory=list)
    provisional: list[RegionOfInterest] = field(default_factory=list)  # cut by the last tile's bottom edge


class DetectionEngine:
    """Incremental pipeline; ``feed`` pings, collect objects as they become final.

    ``on_tile`` is called with every ``TileResult`` in tile order, which is
    how debug images are produced.  Tile results are consumed strictly in
    submission order, so object ids do not depend on worker timing.
    """

    def __init__(self, config: PipelineConfig = PipelineConfig(), source: str = "",
                 on_tile: Callable[[TileResult], None] | None = None):
        self.config = config
        self.source = source
        self.on_tile = on_tile
        self.edge_margin = config.tile_overlap // 4
        self.channels = {
            side: _Channel(side, TileBuilder(side, config.tile_rows, config.tile_overlap, config.equalize))
            for side in config.sides
        }
        self.next_id = 0
        self.pings_seen = 0
        self.objects: list[GeoObject] = []
        # (channel, tile result or future, ping number at submission) in submission order
        self._queue: deque = deque()
        self._pool = ProcessPoolExecutor(config.workers) if config.workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def feed(self, ping: SonarPing) -> list[GeoObject]:
        ch = self.channels.get(ping.channel.side)
        if ch is None:
            return []
        self.pings_seen += 1
        # backpressure: a tile submitted on an earlier ping must be consumed before a later ping is
        # taken, so pool workers overlap only within one ping group and the emission lag stays
        # within one tile length however fast pings arrive
        out = self._drain(wait=False, wait_before=ping.ping_number)
        before = ch.builder.total_rows
        tiles = ch.builder.push(ping)
        if ch.builder.total_rows > before:
            ch.nav.append(ping.ping_number, ping.timestamp, ping.nav)
        for tile in tiles:
            self._submit(ch, tile, ping.ping_number)
        return out + self._drain(wait=False)

    def finish(self) -> list[GeoObject]:
        out = []
        for ch in self.channels.values():
            for tile in ch.builder.flush():
                self._submit(ch, tile, None)
            out.extend(self._drain(wait=True))
            ch.pending = merge_rois(ch.pending + ch.provisional, self.config.roi_merge_iou)
            ch.provisional = []
            out.extend(self._finalize(ch, final=True))
        self.close()
        return out

    def run(self, pings: Iterable[SonarPing]) -> Iterator[GeoObject]:
        for p in pings:
            yield from self.feed(p)
        yield from self.finish()

    def _submit(self, ch: _Channel, tile: WaterfallTile, ping_number):
        if self._pool is not None:
            self._queue.append((ch, self._pool.submit(process_tile, tile, self.config), ping_number))
        else:
            self._queue.append((ch, process_tile(tile, self.config), ping_number))

    def _drain(self, wait: bool, wait_before=None) -> list[GeoObject]:
        out = []
        while self._queue:
            ch, head, submitted = self._queue[0]
            if not isinstance(head, TileResult):
                overdue = wait_before is not None and submitted is not None and submitted < wait_before
                if not (wait or overdue or head.done()):
                    break
                head = head.result()
            self._queue.popleft()
            out.extend(self._consume(ch, head))
        return out

    def _consume(self, ch: _Channel, result: TileResult) -> list[GeoObject]:
        if self.on_tile is not None:
            self.on_tile(result)
        tile = result.tile
        whole, top, bottom = [], [], []
        for roi in result.rois:
            first = min(p.row for p in roi.member_points)
            last = max(p.row for p in roi.member_points)
            placed = roi.translated(tile.tile_origin_row)
            if last >= tile.rows - self.edge_margin:
                bottom.append(placed)
            elif tile.tile_origin_row > 0 and first < self.edge_margin:
                top.append(placed)
            else:
                whole.append(placed)
        # views cut by the previous tile's bottom edge, then by this tile's top edge
        leftover = _absorb(ch.provisional, [whole, top, bottom])
        leftover += _absorb(top, [ch.pending])
        ch.provisional = bottom
        ch.pending = merge_rois(ch.pending + whole + leftover, self.config.roi_merge_iou)
        log.debug("tile", extra={"event": "tile", "channel": ch.side.value, "origin": tile.tile_origin_row,
                                 "features": len(result.cloud), "rois": len(result.rois)})
        # rows before the next tile's origin can never be touched again
        limit = tile.tile_origin_row + tile.rows - tile.overlap_rows
        return self._finalize(ch, final=False, limit=limit)

    def _finalize(self, ch: _Channel, final: bool, limit: int = 0) -> list[GeoObject]:
        done = [r for r in ch.pending if final or r.bbox[2] < limit]
        if not done:
            return []
        ch.pending = [r for r in ch.pending if not (final or r.bbox[2] < limit)]
        out = []
        for roi in sorted(done, key=lambda r: (r.bbox[0], r.bbox[1])):
            ctx = PixelGeoContext(ch.nav, roi.ground_range_per_col, ch.side, self.config.layback())
            obj = roi_to_object(roi, ctx, object_id=self.next_id, source=self.source)
            self.next_id += 1
            out.append(obj)
        self.objects.extend(out)
        return out


def _absorb(cut: list[RegionOfInterest], targets: list[list[RegionOfInterest]]) -> list[RegionOfInterest]:
    """Merge each cut ROI into the target ROI it intersects most (in place); return the unmatched."""
    leftover = []
    for roi in cut:
        best, best_area = None, 0
        for group in targets:
            for i, other in enumerate(group):
                if other is roi or other.channel_side != roi.channel_side:
                    continue
                area = bbox_intersection(roi.bbox, other.bbox)
                if area > best_area:
                    best, best_area = (group, i), area
        if best is None:
            leftover.append(roi)
        else:
            group, i = best
            group[i] = merge_group([group[i], roi])
    return leftover


def detect(pings: Iterable[SonarPing], config: PipelineConfig = PipelineConfig(), source: str = "",
           on_tile: Callable[[TileResult], None] | None = None) -> list[GeoObject]:
    """Run the whole pipeline over a ping sequence; returns the catalog in ping order."""
    with DetectionEngine(config, source, on_tile) as engine:
        objects = list(engine.run(pings))
    return sorted(objects, key=lambda o: (o.ping_span[0], o.object_id))
