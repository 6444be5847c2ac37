"""Connected-component extraction and mask geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy import ndimage

from .errors import BothEmpty, DimMismatch
from .rle import rle_decode, rle_encode
from .types import VOID, BBox, LabelMap, MaskRLE, Point

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Component:
    """Maximal same-class region of a label map."""

    label: int
    mask: MaskRLE
    area: int
    bbox: BBox
    centroid: Point


def _centroid_of(ys: np.ndarray, xs: np.ndarray) -> Point:
    # rounded mean, half away from zero; snapped to the nearest mask pixel
    # when the rounded mean lands outside a concave region (a point prompt
    # must lie on the object)
    cy = int(math.floor(ys.mean() + 0.5))
    cx = int(math.floor(xs.mean() + 0.5))
    inside = ((ys == cy) & (xs == cx)).any()
    if not inside:
        d2 = (ys.astype(np.int64) - cy) ** 2 + (xs.astype(np.int64) - cx) ** 2
        j = int(np.argmin(d2))  # scan order breaks ties
        cy, cx = int(ys[j]), int(xs[j])
    return Point(x=cx, y=cy)


def connected_components(
    label_map: LabelMap,
    adjacency: int = 8,
    class_filter: Optional[Iterable[int]] = None,
    min_area: int = 1,
) -> list[Component]:
    """Split a label map into maximal same-class regions.

    Void pixels never form components. Output is sorted by
    (class, area descending, first pixel in row-major order) so repeated
    runs produce identical lists. `min_area` is an optional pre-filter for
    callers that only want seeds above a size floor.
    """
    if adjacency not in (4, 8):
        raise ValueError("adjacency must be 4 or 8")
    structure = _STRUCT_8 if adjacency == 8 else _STRUCT_4
    data = label_map.data
    present = np.unique(data)
    wanted = None if class_filter is None else set(int(c) for c in class_filter)
    out: list[Component] = []
    for cls in present.tolist():
        if cls == VOID or (wanted is not None and cls not in wanted):
            continue
        binary = data == cls
        labeled, n = ndimage.label(binary, structure=structure)
        if n == 0:
            continue
        slices = ndimage.find_objects(labeled)
        comps = []
        for idx, sl in enumerate(slices, start=1):
            sub = labeled[sl] == idx
            area = int(sub.sum())
            if area < min_area:
                continue
            y0, x0 = sl[0].start, sl[1].start
            ys, xs = np.nonzero(sub)  # row-major scan, so (ys[0], xs[0]) is the first pixel
            comps.append((cls, area, y0 + ys[0], x0 + xs[0], sl, sub, ys + y0, xs + x0))
        comps.sort(key=lambda t: (t[0], -t[1], t[2], t[3]))
        for cls_, area, _, _, sl, sub, ys, xs in comps:
            full = np.zeros(data.shape, dtype=bool)
            full[sl] = sub
            bbox = BBox(x0=sl[1].start, y0=sl[0].start,
                        x1=sl[1].stop - 1, y1=sl[0].stop - 1)
            out.append(Component(label=cls_, mask=rle_encode(full), area=area,
                                 bbox=bbox, centroid=_centroid_of(ys, xs)))
    return out


def enlarge_box(b: BBox, area_factor: float, bounds: tuple[int, int]) -> BBox:
    """Scale a box's half-extents by sqrt(area_factor) about its center.

    Min coordinates are floored and max coordinates ceiled (outward
    rounding), then clamped to the image; the result always contains b.
    """
    if area_factor < 1.0:
        raise ValueError("area_factor must be >= 1")
    w, h = bounds
    s = math.sqrt(area_factor)
    cx = (b.x0 + b.x1) / 2.0
    cy = (b.y0 + b.y1) / 2.0
    hx = (b.x1 - b.x0) / 2.0 * s
    hy = (b.y1 - b.y0) / 2.0 * s
    return BBox(
        x0=max(0, math.floor(cx - hx)),
        y0=max(0, math.floor(cy - hy)),
        x1=min(w - 1, math.ceil(cx + hx)),
        y1=min(h - 1, math.ceil(cy + hy)),
    )


def box_interior_mask(b: BBox, height: int, width: int) -> np.ndarray:
    m = np.zeros((height, width), dtype=bool)
    m[b.y0:b.y1 + 1, b.x0:b.x1 + 1] = True
    return m


def mask_iou(a: MaskRLE, b: MaskRLE) -> float:
    """Intersection over union of two masks with equal dims."""
    if (a.height, a.width) != (b.height, b.width):
        raise DimMismatch(f"{a.height}x{a.width} vs {b.height}x{b.width}")
    ra = rle_decode(a)
    rb = rle_decode(b)
    union = int(np.logical_or(ra, rb).sum())
    if union == 0:
        raise BothEmpty("IoU of two empty masks is undefined")
    inter = int(np.logical_and(ra, rb).sum())
    return inter / union
