"""Synthetic benchmark cases.

A case is a fully labeled ground truth (a nearest-site partition of stuff
classes with things shapes layered on top), an RGB rendering with per-class
base colors plus pixel noise, a corrupted pseudo-label (erode, thin to
speckles, flip some speckle components to wrong classes), and a proposal
pool built from the ground-truth components. Selected adjacent things pairs
additionally contribute their union to the pool as a coarse distractor.
Bookkeeping records every flip and every distractor pair so tests can check
the pipeline against the generator's own truth.
"""
from __future__ import annotations

import colorsys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from . import io as sio
from .components import connected_components
from .errors import ConfigError
from .rle import rle_decode, rle_encode
from .types import (
    VOID,
    ClassDef,
    LabelMap,
    MaskEntry,
    MaskSet,
    STUFF,
    THINGS,
    Taxonomy,
)


@dataclass(frozen=True)
class SynthConfig:
    width: int = 256
    height: int = 256
    n_stuff: int = 4
    n_things: int = 4
    n_stuff_regions: int = 6
    n_things_shapes: int = 5
    n_adjacent_pairs: int = 2
    thing_size: tuple[int, int] = (18, 44)
    erosion_radius: int = 0
    speckle_keep_prob: float = 1.0
    label_flip_rate: float = 0.0
    distractor_merge_rate: float = 0.0
    min_distractor_area: int = 256
    rgb_noise: int = 8
    seed: int = 0

    def __post_init__(self):
        for name in ("speckle_keep_prob", "label_flip_rate", "distractor_merge_rate"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.n_stuff < 1 or self.n_things < 1:
            raise ConfigError("need at least one stuff and one things class")
        if self.n_stuff + self.n_things > 254:
            raise ConfigError("too many classes")
        if self.erosion_radius < 0:
            raise ConfigError("erosion_radius must be >= 0")
        lo, hi = self.thing_size
        if not (2 <= lo <= hi):
            raise ConfigError("thing_size must satisfy 2 <= lo <= hi")

    @property
    def k(self) -> int:
        return self.n_stuff + self.n_things

    def taxonomy(self) -> Taxonomy:
        classes = [ClassDef(name=f"stuff_{i}", kind=STUFF) for i in range(self.n_stuff)]
        classes += [ClassDef(name=f"thing_{i}", kind=THINGS) for i in range(self.n_things)]
        return Taxonomy(tuple(classes))

    @staticmethod
    def from_json(obj: dict) -> "SynthConfig":
        known = {f for f in SynthConfig.__dataclass_fields__}
        extra = set(obj) - known - {"n_cases"}
        if extra:
            raise ConfigError(f"unknown synth config keys: {sorted(extra)}")
        kwargs = {k: v for k, v in obj.items() if k in known}
        if "thing_size" in kwargs:
            kwargs["thing_size"] = tuple(kwargs["thing_size"])
        return SynthConfig(**kwargs)


@dataclass(frozen=True)
class SynthCase:
    image: np.ndarray  # (H, W, 3) uint8
    gt: LabelMap
    pseudo: LabelMap
    proposals: MaskSet
    truth: dict  # JSON-able bookkeeping
    taxonomy: Taxonomy


def class_palette(k: int) -> np.ndarray:
    """K well-separated base colors, (K, 3) uint8."""
    colors = []
    for c in range(k):
        r, g, b = colorsys.hsv_to_rgb(c / k, 0.75, 0.9)
        colors.append((int(r * 255), int(g * 255), int(b * 255)))
    return np.asarray(colors, dtype=np.uint8)


def _paint_shape(canvas: np.ndarray, rng: np.random.Generator, cls: int,
                 size_range: tuple[int, int], kind: Optional[str] = None,
                 at: Optional[tuple[int, int]] = None,
                 size: Optional[tuple[int, int]] = None) -> tuple[int, int, int, int]:
    h, w = canvas.shape
    lo, hi = size_range
    if size is None:
        size = (int(rng.integers(lo, min(hi, h - 1) + 1)),
                int(rng.integers(lo, min(hi, w - 1) + 1)))
    sh, sw = size
    if at is None:
        at = (int(rng.integers(0, h - sh + 1)), int(rng.integers(0, w - sw + 1)))
    y0, x0 = at
    kind = kind or ("rect" if rng.random() < 0.5 else "ellipse")
    if kind == "rect":
        canvas[y0:y0 + sh, x0:x0 + sw] = cls
    else:
        yy, xx = np.mgrid[0:sh, 0:sw]
        cy, cx = (sh - 1) / 2.0, (sw - 1) / 2.0
        inside = ((yy - cy) / (sh / 2.0)) ** 2 + ((xx - cx) / (sw / 2.0)) ** 2 <= 1.0
        canvas[y0:y0 + sh, x0:x0 + sw][inside] = cls
    return (y0, x0, sh, sw)


def _erode_labels(gt: np.ndarray, radius: int) -> np.ndarray:
    if radius == 0:
        return gt.copy()
    size = 2 * radius + 1
    out = np.full_like(gt, VOID)
    for cls in np.unique(gt):
        if cls == VOID:
            continue
        mask = gt == cls
        eroded = ndimage.minimum_filter(mask.astype(np.uint8), size=size,
                                        mode="constant", cval=0) == 1
        out[eroded] = cls
    return out


def _adjacent(mask_a: np.ndarray, mask_b: np.ndarray) -> bool:
    grown = ndimage.binary_dilation(mask_a, structure=np.ones((3, 3), dtype=bool))
    return bool((grown & mask_b).any())


def synth_case(cfg: SynthConfig) -> SynthCase:
    rng = np.random.default_rng(cfg.seed)
    h, w = cfg.height, cfg.width
    k = cfg.k

    # stuff background: nearest-site partition, sites cycle through stuff classes
    sites = np.stack([rng.integers(0, h, cfg.n_stuff_regions),
                      rng.integers(0, w, cfg.n_stuff_regions)], axis=1)
    site_cls = np.array([i % cfg.n_stuff for i in range(cfg.n_stuff_regions)])
    yy, xx = np.mgrid[0:h, 0:w]
    d2 = (yy[..., None] - sites[:, 0]) ** 2 + (xx[..., None] - sites[:, 1]) ** 2
    gt = site_cls[np.argmin(d2, axis=2)].astype(np.uint8)

    # free-floating things shapes
    things_lo = cfg.n_stuff
    for _ in range(cfg.n_things_shapes):
        cls = int(rng.integers(things_lo, k))
        _paint_shape(gt, rng, cls, cfg.thing_size)

    # forced adjacent things pairs with distinct classes (side by side)
    pair_boxes = []
    for _ in range(cfg.n_adjacent_pairs):
        ca = int(rng.integers(things_lo, k))
        cb = int(rng.integers(things_lo, k))
        while cb == ca:
            cb = int(rng.integers(things_lo, k))
        lo, hi = cfg.thing_size
        hi_h = min(hi, h - 1)
        hi_w = min(hi, (w - 1) // 2)  # two shapes side by side must fit
        sh = int(rng.integers(lo, hi_h + 1))
        wa = int(rng.integers(lo, hi_w + 1))
        wb = int(rng.integers(lo, hi_w + 1))
        y0 = int(rng.integers(0, h - sh + 1))
        x0 = int(rng.integers(0, w - wa - wb + 1))
        _paint_shape(gt, rng, ca, cfg.thing_size, kind="rect", at=(y0, x0), size=(sh, wa))
        _paint_shape(gt, rng, cb, cfg.thing_size, kind="rect", at=(y0, x0 + wa), size=(sh, wb))
        pair_boxes.append({"classes": [ca, cb],
                           "boxes": [[x0, y0, x0 + wa - 1, y0 + sh - 1],
                                     [x0 + wa, y0, x0 + wa + wb - 1, y0 + sh - 1]]})

    gt_map = LabelMap(gt)

    # corruption: erode, thin, flip speckle components
    pseudo = _erode_labels(gt, cfg.erosion_radius)
    if cfg.speckle_keep_prob < 1.0:
        drop = rng.random((h, w)) >= cfg.speckle_keep_prob
        pseudo[drop] = VOID
    # flips stay within the class kind (stuff to stuff, things to things):
    # cross-kind speckle noise would make the file-backend prompt emulation
    # hand whole stuff regions to things seeds, a failure mode no box-scale
    # conditioned prompt backend exhibits
    flips = []
    flip_pixels = np.zeros((h, w), dtype=bool)
    if cfg.label_flip_rate > 0.0:
        stuff_classes = list(range(cfg.n_stuff))
        things_classes = list(range(things_lo, k))
        for comp in connected_components(LabelMap(pseudo.copy()), adjacency=8):
            if rng.random() >= cfg.label_flip_rate:
                continue
            kind_pool = stuff_classes if comp.label < things_lo else things_classes
            candidates = [c for c in kind_pool if c != comp.label]
            if not candidates:
                continue
            wrong = candidates[int(rng.integers(0, len(candidates)))]
            m = rle_decode(comp.mask)
            pseudo[m] = wrong
            flip_pixels |= m
            flips.append({"rle": sio.rle_to_json(comp.mask),
                          "from": comp.label, "to": wrong, "area": comp.area})

    # proposals: one mask per GT component, plus union distractors for some
    # adjacent things pairs (the fine masks stay in the pool, the union is an
    # extra coarse candidate)
    comps = connected_components(gt_map, adjacency=8)
    entries = []
    comp_masks = []
    comp_info = []
    for i, comp in enumerate(comps):
        entries.append(MaskEntry(id=i, rle=comp.mask, source="auto"))
        comp_masks.append(rle_decode(comp.mask))
        comp_info.append({"id": i, "class": comp.label, "area": comp.area})

    # distractor pairs need substance on both sides: overpainting slivers and
    # components whose pseudo evidence was wiped by the corruption are not
    # meaningful granularity candidates
    min_pair_support = 4
    labeled = pseudo != VOID

    def eligible(i):
        comp = comps[i]
        return (comp.label >= things_lo and comp.area >= cfg.min_distractor_area
                and int(labeled[comp_masks[i]].sum()) >= min_pair_support)

    things_comp_ids = [i for i in range(len(comps)) if eligible(i)]
    merged_pairs = []
    next_id = len(entries)
    for ai in range(len(things_comp_ids)):
        for bi in range(ai + 1, len(things_comp_ids)):
            ia, ib = things_comp_ids[ai], things_comp_ids[bi]
            if not _adjacent(comp_masks[ia], comp_masks[ib]):
                continue
            if rng.random() >= cfg.distractor_merge_rate:
                continue
            union = comp_masks[ia] | comp_masks[ib]
            entries.append(MaskEntry(id=next_id, rle=rle_encode(union), source="auto"))
            merged_pairs.append({
                "union_id": next_id,
                "component_ids": [ia, ib],
                "classes": [comps[ia].label, comps[ib].label],
            })
            next_id += 1
    proposals = MaskSet(image_id=f"synth_{cfg.seed}", height=h, width=w,
                        masks=tuple(entries))

    # RGB render of the true classes: base color per class plus pixel noise
    palette = class_palette(k)
    image = palette[gt].astype(np.int16)
    if cfg.rgb_noise > 0:
        image = image + rng.integers(-cfg.rgb_noise, cfg.rgb_noise + 1, (h, w, 3))
    image = np.clip(image, 0, 255).astype(np.uint8)

    truth = {
        "seed": cfg.seed,
        "k": k,
        "n_stuff": cfg.n_stuff,
        "gt_components": comp_info,
        "flipped": flips,
        "flip_pixels": sio.rle_to_json(rle_encode(flip_pixels)),
        "merged_pairs": merged_pairs,
        "adjacent_pair_boxes": pair_boxes,
    }
    return SynthCase(image=image, gt=gt_map, pseudo=LabelMap(pseudo),
                     proposals=proposals, truth=truth, taxonomy=cfg.taxonomy())


def write_case(case: SynthCase, out_dir) -> None:
    """image.png, gt.png, pseudo.png, masks.json, truth.json (and taxonomy.json)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sio.save_rgb(case.image, out / "image.png")
    sio.save_label_map(case.gt, out / "gt.png")
    sio.save_label_map(case.pseudo, out / "pseudo.png")
    sio.save_mask_set(case.proposals, out / "masks.json")
    sio.write_json(case.truth, out / "truth.json")
    sio.save_taxonomy(case.taxonomy, out / "taxonomy.json")
