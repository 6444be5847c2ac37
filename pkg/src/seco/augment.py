"""Minority-class resampling pool and copy-paste augmentation."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DoesNotFit, EmptyInput, PoolEmpty
from .rle import rle_decode
from .types import Connectivity, LabelMap, RefinedSet, Taxonomy


def build_resample_pool(
    refined_sets: Sequence[tuple[str, RefinedSet]],
    taxonomy: Taxonomy,
) -> dict[int, list[tuple[str, Connectivity]]]:
    """Pool of minority-class connectivities from the kept + corrected sets.

    Per-class pixel frequencies are counted over all kept connectivities;
    minority classes are those strictly below the median frequency. Each
    pool entry carries the image reference it came from.
    """
    refined_sets = list(refined_sets)
    if not refined_sets:
        raise EmptyInput("no refined sets supplied")
    freq = np.zeros(taxonomy.k, dtype=np.int64)
    for _, rs in refined_sets:
        for c in rs.all_kept:
            freq[c.label] += c.area
    median = float(np.median(freq))
    minority = {c for c in range(taxonomy.k) if freq[c] < median}
    pool: dict[int, list[tuple[str, Connectivity]]] = {c: [] for c in sorted(minority)}
    for image_ref, rs in refined_sets:
        for c in rs.all_kept:
            if c.label in minority:
                pool[c.label].append((image_ref, c))
    return {c: items for c, items in pool.items() if items}


def copy_paste(
    pool: dict[int, list[tuple[str, Connectivity]]],
    dst_image: np.ndarray,
    dst_label: LabelMap,
    rng_seed: int,
    n_paste: int = 1,
    placement: str = "original",
    load_rgb=None,
) -> tuple[np.ndarray, LabelMap]:
    """Paste sampled minority connectivities onto an image / label pair.

    Sampling is class-uniform, then item-uniform, from a seeded generator.
    Each paste is a rigid translation: RGB and label pixels are copied under
    the mask, later pastes overwrite earlier ones. `load_rgb` maps an image
    reference to its (H, W, 3) array (results are cached here).
    """
    if not pool:
        raise PoolEmpty("resample pool has no entries")
    if placement not in ("original", "uniform-random"):
        raise ValueError("placement must be 'original' or 'uniform-random'")
    if load_rgb is None:
        from . import io as sio

        load_rgb = sio.load_rgb

    out_img = np.asarray(dst_image, dtype=np.uint8).copy()
    out_lab = np.asarray(dst_label.data).copy()
    dh, dw = out_lab.shape
    if out_img.shape[:2] != (dh, dw):
        raise DoesNotFit("destination image and label dims differ")

    rng = np.random.default_rng(rng_seed)
    classes = sorted(pool)
    cache: dict[str, np.ndarray] = {}
    for _ in range(n_paste):
        cls = classes[int(rng.integers(0, len(classes)))]
        items = pool[cls]
        image_ref, conn = items[int(rng.integers(0, len(items)))]
        if image_ref not in cache:
            cache[image_ref] = np.asarray(load_rgb(image_ref), dtype=np.uint8)
        src_img = cache[image_ref]

        mask = rle_decode(conn.mask)
        ys, xs = np.nonzero(mask)
        y0, y1 = int(ys.min()), int(ys.max())
        x0, x1 = int(xs.min()), int(xs.max())
        bh, bw = y1 - y0 + 1, x1 - x0 + 1
        if bh > dh or bw > dw:
            raise DoesNotFit(f"connectivity {conn.id} ({bh}x{bw}) exceeds destination")
        sub = mask[y0:y1 + 1, x0:x1 + 1]
        patch = src_img[y0:y1 + 1, x0:x1 + 1]

        if placement == "original":
            if mask.shape != (dh, dw):
                raise DoesNotFit("original placement needs matching source/destination dims")
            ty, tx = y0, x0
        else:
            ty = int(rng.integers(0, dh - bh + 1))
            tx = int(rng.integers(0, dw - bw + 1))

        dst_img_view = out_img[ty:ty + bh, tx:tx + bw]
        dst_lab_view = out_lab[ty:ty + bh, tx:tx + bw]
        dst_img_view[sub] = patch[sub]
        dst_lab_view[sub] = conn.label
    return out_img, LabelMap(out_lab)
