"""Binary PGM/PPM debug images and detection overlays.

Overlays draw one marker pixel per feature position on the grey tile:
green for features inside a cluster, red for features rejected as noise,
and white rectangles for ROI boxes.  Grey pixels always have r == g == b,
so markers can be counted back from the image.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

GREEN = (0, 255, 0)
RED = (255, 0, 0)
WHITE = (255, 255, 255)


def write_pgm(path, pixels: np.ndarray) -> Path:
    px = np.ascontiguousarray(pixels, dtype=np.uint8)
    h, w = px.shape
    path = Path(path)
    path.write_bytes(b"P5\n%d %d\n255\n" % (w, h) + px.tobytes())
    return path


def write_ppm(path, rgb: np.ndarray) -> Path:
    px = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, _ = px.shape
    path = Path(path)
    path.write_bytes(b"P6\n%d %d\n255\n" % (w, h) + px.tobytes())
    return path


def read_pnm(path) -> np.ndarray:
    """Read a binary 8-bit PGM (2-D result) or PPM (3-D result)."""
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    pos += 1  # single whitespace before the raster
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255 or magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported PNM image {path}")
    depth = 1 if magic == b"P5" else 3
    arr = np.frombuffer(data, np.uint8, count=w * h * depth, offset=pos)
    return arr.reshape(h, w) if depth == 1 else arr.reshape(h, w, 3)


def _gray_rgb(pixels: np.ndarray) -> np.ndarray:
    return np.repeat(np.asarray(pixels, dtype=np.uint8)[:, :, None], 3, axis=2)


def draw_box(rgb: np.ndarray, bbox, color=WHITE):
    r0, c0, r1, c1 = bbox
    h, w, _ = rgb.shape
    r0, r1 = max(r0, 0), min(r1, h - 1)
    c0, c1 = max(c0, 0), min(c1, w - 1)
    if r1 < r0 or c1 < c0:
        return
    rgb[r0, c0:c1 + 1] = color
    rgb[r1, c0:c1 + 1] = color
    rgb[r0:r1 + 1, c0] = color
    rgb[r0:r1 + 1, c1] = color


def feature_overlay(pixels: np.ndarray, rows, cols, labels=None) -> np.ndarray:
    """Markers on the tile; with ``labels`` noise (-1) is red and clustered green, else all green."""
    rgb = _gray_rgb(pixels)
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    if labels is None:
        rgb[rows, cols] = GREEN
        return rgb
    labels = np.asarray(labels)
    noise = labels < 0
    rgb[rows[noise], cols[noise]] = RED
    # clustered markers win where both land on one pixel
    rgb[rows[~noise], cols[~noise]] = GREEN
    return rgb


def roi_overlay(pixels: np.ndarray, rows, cols, labels, bboxes) -> np.ndarray:
    rgb = feature_overlay(pixels, rows, cols, labels)
    for bbox in bboxes:
        draw_box(rgb, bbox)
    return rgb


def marker_mask(rgb: np.ndarray, color) -> np.ndarray:
    return np.all(rgb == np.array(color, dtype=np.uint8), axis=2)
