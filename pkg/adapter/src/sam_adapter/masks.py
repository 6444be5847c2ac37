"""Mask helpers: column-major RLE and the mock generators.

The RLE matches the wire contract: counts alternate zero/one runs scanned
down each column, the first count is the leading zero run (possibly 0).
"""
from __future__ import annotations

import numpy as np


def rle_encode(mask: np.ndarray) -> dict:
    m = np.asarray(mask)
    h, w = m.shape
    flat = (m != 0).ravel(order="F")
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return {"height": int(h), "width": int(w), "counts": [int(c) for c in counts]}


def box_mask(h: int, w: int, box: list[int]) -> np.ndarray:
    x0, y0, x1, y1 = box
    m = np.zeros((h, w), dtype=bool)
    m[y0:y1 + 1, x0:x1 + 1] = True
    return m


def grid_masks(h: int, w: int, tiles: int = 4) -> list[np.ndarray]:
    """Fixed tiles x tiles partition; empty tiles (image smaller than the
    grid) are skipped."""
    ys = [round(i * h / tiles) for i in range(tiles + 1)]
    xs = [round(j * w / tiles) for j in range(tiles + 1)]
    out = []
    for i in range(tiles):
        for j in range(tiles):
            if ys[i + 1] <= ys[i] or xs[j + 1] <= xs[j]:
                continue
            m = np.zeros((h, w), dtype=bool)
            m[ys[i]:ys[i + 1], xs[j]:xs[j + 1]] = True
            out.append(m)
    return out
