"""End-to-end refinement over one image or a manifest of images.

The aggregation stage and feature pooling run per image (optionally in a
thread pool); the classifier, the loss mixture, and the noise posteriors are
then computed once over the pooled connectivities of the whole run, and the
per-image selection / rendering / report files are written last. A flag
switches the mixture to per-image fitting.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io as sio
from . import plots
from .backend import SegmenterBackend
from .psa import run_psa
from .scc import (
    extract_features,
    pool_features,
    render_pseudo_label,
    score_connectivities,
    select_and_correct,
)
from .types import (
    Connectivity,
    GmmFit,
    LabelMap,
    PsaConfig,
    RefinedSet,
    SccConfig,
    Taxonomy,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ManifestEntry:
    image: str
    pseudo: str
    out: str


def load_manifest(path) -> list[ManifestEntry]:
    raw = sio.read_json(path)
    entries = []
    base = Path(path).parent
    for e in raw:
        entries.append(ManifestEntry(
            image=str(_resolve(base, e["image"])),
            pseudo=str(_resolve(base, e["pseudo"])),
            out=str(_resolve(base, e["out"])),
        ))
    return entries


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


@dataclass
class _Stage1:
    entry: ManifestEntry
    image_id: str
    dims: tuple[int, int]
    conns: list[Connectivity]
    psa_raster: LabelMap
    vectors: np.ndarray


def _stage1(entry: ManifestEntry, taxonomy: Taxonomy, backend: SegmenterBackend,
            psa_cfg: PsaConfig) -> _Stage1:
    pseudo = sio.load_label_map(entry.pseudo, taxonomy)
    conns, raster, _ = run_psa(pseudo, taxonomy, backend, entry.image, psa_cfg)
    fm = extract_features(entry.image, mode="handcrafted")
    if (fm.height, fm.width) != (pseudo.height, pseudo.width):
        from .errors import DimMismatch

        raise DimMismatch(f"{entry.image}: image and pseudo-label dims differ")
    vectors = np.stack([pool_features(fm, c.mask) for c in conns]) if conns else \
        np.zeros((0, fm.depth))
    return _Stage1(entry=entry, image_id=Path(entry.image).stem,
                   dims=(pseudo.height, pseudo.width), conns=conns,
                   psa_raster=raster, vectors=vectors)


def write_psa_outputs(out_dir, image_id: str, dims, conns, raster, image: Optional[str] = None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sio.write_json(
        sio.connectivities_to_json(conns, image_id, dims[0], dims[1], image=image),
        out / f"{image_id}.connectivities.json",
    )
    sio.save_label_map(raster, out / f"{image_id}.psa.png")


def write_scc_outputs(out_dir, image_id: str, dims, refined: RefinedSet,
                      gmm: Optional[GmmFit], image: Optional[str] = None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sio.write_json(
        sio.refined_set_to_json(refined, image_id, dims[0], dims[1], image=image),
        out / f"{image_id}.refined.json",
    )
    sio.save_label_map(render_pseudo_label(refined, dims), out / f"{image_id}.refined.png")
    everything = list(refined.clean) + list(refined.corrected) + list(refined.dropped)
    partitions = {c.id: part for part, conns in
                  (("clean", refined.clean), ("corrected", refined.corrected),
                   ("dropped", refined.dropped)) for c in conns}
    plots.write_loss_csv(everything, partitions, out / f"{image_id}.losses.csv")
    losses = [c.loss for c in everything if c.loss is not None]
    plots.plot_loss_histogram(losses, gmm, out / f"{image_id}.losses.png",
                              title=f"{image_id}: connectivity loss distribution")


def refine_manifest(
    entries: Sequence[ManifestEntry],
    taxonomy: Taxonomy,
    backend: SegmenterBackend,
    psa_cfg: PsaConfig = PsaConfig(),
    scc_cfg: SccConfig = SccConfig(),
    workers: int = 1,
    gmm_per_image: bool = False,
) -> list[tuple[ManifestEntry, RefinedSet]]:
    entries = list(entries)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            stage1 = list(ex.map(lambda e: _stage1(e, taxonomy, backend, psa_cfg), entries))
    else:
        stage1 = [_stage1(e, taxonomy, backend, psa_cfg) for e in entries]

    for s in stage1:
        write_psa_outputs(s.entry.out, s.image_id, s.dims, s.conns, s.psa_raster,
                          image=s.entry.image)

    results = []
    if gmm_per_image:
        for s in stage1:
            scored, gmm, _ = score_connectivities(s.conns, s.vectors, scc_cfg,
                                                  n_classes=taxonomy.k)
            refined = select_and_correct(scored, scc_cfg)
            write_scc_outputs(s.entry.out, s.image_id, s.dims, refined, gmm,
                              image=s.entry.image)
            results.append((s.entry, refined))
        return results

    # pooled correction: one classifier and one loss mixture over the run
    all_conns = [c for s in stage1 for c in s.conns]
    all_vectors = (np.concatenate([s.vectors for s in stage1], axis=0)
                   if all_conns else np.zeros((0, 7)))
    scored, gmm, _ = score_connectivities(all_conns, all_vectors, scc_cfg,
                                          n_classes=taxonomy.k)
    offset = 0
    for s in stage1:
        n = len(s.conns)
        conns_scored = scored[offset:offset + n]
        offset += n
        refined = select_and_correct(conns_scored, scc_cfg)
        write_scc_outputs(s.entry.out, s.image_id, s.dims, refined, gmm,
                          image=s.entry.image)
        results.append((s.entry, refined))
    return results
