"""Run-length codec for binary masks.

Scan order is column-major (down each column, left to right); the first
count is the leading zero-run, so a mask starting with 1 encodes as
[0, ...]. Round trips are bit exact.
"""
from __future__ import annotations

import numpy as np

from .types import MaskRLE


def rle_encode(mask: np.ndarray) -> MaskRLE:
    """Encode a 2-D binary raster (nonzero = foreground)."""
    m = np.asarray(mask)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("mask must be a non-empty 2-D raster")
    h, w = m.shape
    flat = (m != 0).ravel(order="F")
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return MaskRLE(height=h, width=w, counts=tuple(counts))


def rle_decode(rle: MaskRLE) -> np.ndarray:
    """Decode to a bool raster of shape (height, width)."""
    n = rle.height * rle.width
    flat = np.zeros(n, dtype=bool)
    pos = 0
    value = False
    for c in rle.counts:
        if value:
            flat[pos:pos + c] = True
        pos += c
        value = not value
    return flat.reshape((rle.height, rle.width), order="F")


def rle_from_counts(height: int, width: int, counts) -> MaskRLE:
    """Build a MaskRLE from raw counts, validating the encoding contract."""
    return MaskRLE(height=height, width=width, counts=tuple(int(c) for c in counts))
