"""Pixel semantic aggregation.

Speckled pixel pseudo-labels are turned into region-level labels along two
branches. Discrete-object ("things") classes are handled per seed component:
the seed's enlarged bounding box plus its center point are sent to the mask
backend and the returned mask inherits the seed's class. Amorphous ("stuff")
classes are handled by majority vote: each automatic proposal takes the
stuff class with the largest pixel count under it. A merge pass then removes
duplicates, gives things precedence over stuff, and rasterizes the survivors.
"""
from __future__ import annotations

import numpy as np

from .backend import SegmenterBackend
from .components import connected_components, enlarge_box, mask_iou
from .errors import DimMismatch, EmptyResult
from .rle import rle_decode, rle_encode
from .types import (
    VOID,
    Connectivity,
    LabelMap,
    MaskSet,
    PROV_STUFF,
    PROV_THINGS,
    PsaConfig,
    Taxonomy,
)


def aggregate_things(
    pseudo: LabelMap,
    taxonomy: Taxonomy,
    backend: SegmenterBackend,
    image_ref: str,
    cfg: PsaConfig = PsaConfig(),
    id_start: int = 0,
) -> list[Connectivity]:
    """Prompt the backend once per things seed component.

    Seeds below `cfg.min_seed_area` are skipped (degenerate boxes). A prompt
    that comes back empty degrades to the seed's own mask instead of dropping
    the seed. Backend unavailability propagates and aborts the image.
    """
    things = taxonomy.things_ids
    if not things:
        return []
    dims = (pseudo.height, pseudo.width)
    seeds = connected_components(pseudo, adjacency=cfg.adjacency,
                                 class_filter=things, min_area=cfg.min_seed_area)
    out: list[Connectivity] = []
    next_id = id_start
    for seed in seeds:
        box = enlarge_box(seed.bbox, cfg.area_factor, (pseudo.width, pseudo.height))
        try:
            mask = backend.prompt_segment(image_ref, box, seed.centroid, expect_dims=dims)
        except EmptyResult:
            mask = seed.mask  # degraded, not dropped
        out.append(Connectivity(id=next_id, mask=mask, label=seed.label,
                                provenance=PROV_THINGS, area=mask.area,
                                seed_area=seed.area))
        next_id += 1
    return out


def align_stuff(
    pseudo: LabelMap,
    taxonomy: Taxonomy,
    proposals: MaskSet,
    cfg: PsaConfig = PsaConfig(),
    id_start: int = 0,
) -> list[Connectivity]:
    """Give each proposal the stuff class with the largest pixel count under it.

    Votes from things classes and void are ignored. Proposals whose stuff-vote
    fraction is below `cfg.min_labeled_frac` are skipped.
    """
    if (proposals.height, proposals.width) != (pseudo.height, pseudo.width):
        raise DimMismatch("proposal dims differ from pseudo-label dims")
    stuff = taxonomy.stuff_ids
    if not stuff:
        return []
    stuff_arr = np.asarray(stuff, dtype=np.int64)
    data = pseudo.data
    out: list[Connectivity] = []
    next_id = id_start
    for entry in proposals.masks:
        m = rle_decode(entry.rle)
        area = int(m.sum())
        if area == 0:
            continue
        votes = np.bincount(data[m].astype(np.int64), minlength=256)
        stuff_votes = votes[stuff_arr]
        labeled = int(stuff_votes.sum())
        if labeled / area < cfg.min_labeled_frac or labeled == 0:
            continue
        label = int(stuff_arr[int(np.argmax(stuff_votes))])  # ties: lower class index
        out.append(Connectivity(id=next_id, mask=entry.rle, label=label,
                                provenance=PROV_STUFF, area=entry.rle.area))
        next_id += 1
    return out


def merge_connectivities(
    things: list[Connectivity],
    stuff: list[Connectivity],
    cfg: PsaConfig = PsaConfig(),
    dims: tuple[int, int] | None = None,
) -> tuple[list[Connectivity], LabelMap]:
    """Deduplicate, apply things-over-stuff precedence, filter, rasterize.

    Things pairs with IoU above `cfg.overlap_thresh` keep the one with the
    larger seed area (ties: lower id). Stuff masks lose every pixel covered
    by a surviving things mask and are dropped when that costs more than
    `cfg.overlap_thresh` of their area. Anything below `cfg.min_area` goes.
    The raster paints survivors in id order, so of the remaining overlaps the
    later id wins; unpainted pixels are void. `dims` is only needed when both
    lists are empty.
    """
    for c in list(things) + list(stuff):
        d = (c.mask.height, c.mask.width)
        if dims is None:
            dims = d
        elif d != dims:
            raise DimMismatch("connectivity masks disagree on dims")
    if dims is None:
        raise ValueError("nothing to merge and no dims given")

    # things vs things: greedy keep by (seed area desc, id asc)
    kept_things: list[Connectivity] = []
    order = sorted(things, key=lambda c: (-(c.seed_area or c.area), c.id))
    for cand in order:
        if all(mask_iou(cand.mask, k.mask) <= cfg.overlap_thresh for k in kept_things):
            kept_things.append(cand)
    kept_things.sort(key=lambda c: c.id)

    things_union = np.zeros(dims, dtype=bool)
    for c in kept_things:
        things_union |= rle_decode(c.mask)

    # stuff loses pixels under things; heavy losers are dropped
    kept_stuff: list[Connectivity] = []
    for c in stuff:
        m = rle_decode(c.mask)
        trimmed = m & ~things_union
        remaining = int(trimmed.sum())
        lost_frac = (c.area - remaining) / c.area
        if lost_frac > cfg.overlap_thresh or remaining == 0:
            continue
        if remaining != c.area:
            c = Connectivity(id=c.id, mask=rle_encode(trimmed), label=c.label,
                             provenance=c.provenance, area=remaining,
                             seed_area=c.seed_area)
        kept_stuff.append(c)

    survivors = [c for c in kept_things + kept_stuff if c.area >= cfg.min_area]
    survivors.sort(key=lambda c: c.id)

    canvas = np.full(dims, VOID, dtype=np.uint8)
    for c in survivors:
        canvas[rle_decode(c.mask)] = c.label
    return survivors, LabelMap(canvas)


def run_psa(
    pseudo: LabelMap,
    taxonomy: Taxonomy,
    backend: SegmenterBackend,
    image_ref: str,
    cfg: PsaConfig = PsaConfig(),
) -> tuple[list[Connectivity], LabelMap, MaskSet]:
    """Both branches plus the merge; returns (connectivities, raster, proposals)."""
    dims = (pseudo.height, pseudo.width)
    proposals = backend.auto_masks(image_ref, expect_dims=dims)
    things = aggregate_things(pseudo, taxonomy, backend, image_ref, cfg, id_start=0)
    stuff = align_stuff(pseudo, taxonomy, proposals, cfg, id_start=len(things))
    conns, raster = merge_connectivities(things, stuff, cfg, dims=dims)
    return conns, raster, proposals
