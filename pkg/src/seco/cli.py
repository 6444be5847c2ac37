"""Command-line surface.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 backend
unavailable. Flag values override the optional --config JSON file, which
overrides built-in defaults.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io as sio
from .augment import build_resample_pool, copy_paste
from .backend import open_backend
from .errors import BackendUnavailable, SecoError
from .metrics import evaluate
from .pipeline import (
    ManifestEntry,
    load_manifest,
    refine_manifest,
    write_psa_outputs,
    write_scc_outputs,
)
from .psa import run_psa
from .scc import extract_features, pool_features, score_connectivities, select_and_correct
from .synth import SynthConfig, synth_case, write_case
from .types import PsaConfig, SccConfig


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _layer_config(cls, file_cfg: dict, args: argparse.Namespace):
    """defaults < config file < explicit flags"""
    values = {}
    for f in fields(cls):
        if f.name in file_cfg:
            values[f.name] = file_cfg[f.name]
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    return cls(**values)


def _read_config_file(args) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    cfg = sio.read_json(path)
    if not isinstance(cfg, dict):
        raise SecoError(f"{path}: config must be a JSON object")
    return cfg


def _add_psa_flags(p):
    p.add_argument("--area-factor", dest="area_factor", type=float)
    p.add_argument("--adjacency", type=int, choices=(4, 8))
    p.add_argument("--min-seed-area", dest="min_seed_area", type=int)
    p.add_argument("--min-labeled-frac", dest="min_labeled_frac", type=float)
    p.add_argument("--overlap-thresh", dest="overlap_thresh", type=float)
    p.add_argument("--min-area", dest="min_area", type=int)


def _add_scc_flags(p):
    p.add_argument("--tau-ns", dest="tau_ns", type=float)
    p.add_argument("--tau-cr", dest="tau_cr", type=float)
    p.add_argument("--warmup-iters", dest="warmup_iters", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--em-max-iters", dest="em_max_iters", type=int)
    p.add_argument("--em-tol", dest="em_tol", type=float)


def _backend_from(args):
    spec = args.backend or os.environ.get("SECO_BACKEND")
    if not spec:
        raise SecoError("no backend: pass --backend or set SECO_BACKEND")
    return open_backend(spec)


def _features_from(spec: str):
    if spec.startswith("handcrafted:"):
        return extract_features(spec[len("handcrafted:"):], mode="handcrafted")
    if spec.startswith("file:"):
        return extract_features(spec[len("file:"):], mode="file")
    raise SecoError(f"bad --features {spec!r}; use handcrafted:IMAGE or file:PATH")


def _cmd_psa(args) -> int:
    taxonomy = sio.load_taxonomy(args.taxonomy)
    cfg = _layer_config(PsaConfig, _read_config_file(args), args)
    pseudo = sio.load_label_map(args.pseudo, taxonomy)
    backend = _backend_from(args)
    conns, raster, _ = run_psa(pseudo, taxonomy, backend, args.image, cfg)
    image_id = Path(args.image).stem
    write_psa_outputs(args.out, image_id, (pseudo.height, pseudo.width), conns, raster,
                      image=args.image)
    print(f"{image_id}: {len(conns)} connectivities -> {args.out}")
    return 0


def _cmd_scc(args) -> int:
    taxonomy = sio.load_taxonomy(args.taxonomy)
    cfg = _layer_config(SccConfig, _read_config_file(args), args)
    image_id, h, w, image, conns = sio.load_connectivities(args.connectivities)
    fm = _features_from(args.features)
    if (fm.height, fm.width) != (h, w):
        raise SecoError(f"feature dims {fm.height}x{fm.width} differ from {h}x{w}")
    vectors = (np.stack([pool_features(fm, c.mask) for c in conns])
               if conns else np.zeros((0, fm.depth)))
    scored, gmm, _ = score_connectivities(conns, vectors, cfg, n_classes=taxonomy.k)
    refined = select_and_correct(scored, cfg)
    write_scc_outputs(args.out, image_id, (h, w), refined, gmm, image=image)
    print(f"{image_id}: clean={len(refined.clean)} corrected={len(refined.corrected)} "
          f"dropped={len(refined.dropped)} -> {args.out}")
    return 0


def _cmd_refine(args) -> int:
    taxonomy = sio.load_taxonomy(args.taxonomy)
    file_cfg = _read_config_file(args)
    psa_cfg = _layer_config(PsaConfig, file_cfg, args)
    scc_cfg = _layer_config(SccConfig, file_cfg, args)
    backend = _backend_from(args)
    entries = load_manifest(args.manifest)
    workers = args.workers if args.workers else (os.cpu_count() or 1)
    results = refine_manifest(entries, taxonomy, backend, psa_cfg, scc_cfg,
                              workers=workers, gmm_per_image=args.gmm_per_image)
    for entry, refined in results:
        print(f"{Path(entry.image).stem}: clean={len(refined.clean)} "
              f"corrected={len(refined.corrected)} dropped={len(refined.dropped)}")
    return 0


def _cmd_eval(args) -> int:
    taxonomy = sio.load_taxonomy(args.taxonomy)
    pred = sio.load_label_map(args.pred, taxonomy)
    gt = sio.load_label_map(args.gt, taxonomy)
    m = evaluate(pred, gt, taxonomy)
    if args.json:
        print(sio.dumps_canonical(m.to_json()), end="")
    else:
        print(f"miou {m.miou:.4f}")
        print(f"pixel_accuracy {m.pixel_accuracy:.4f}")
        print(f"coverage {m.coverage:.4f}")
        for cls, iou in zip(taxonomy.classes, m.per_class_iou):
            print(f"iou[{cls.name}] " + ("absent" if iou is None else f"{iou:.4f}"))
    return 0


def _cmd_synth(args) -> int:
    raw = sio.read_json(args.config)
    if not isinstance(raw, dict):
        raise SecoError(f"{args.config}: config must be a JSON object")
    n_cases = int(raw.get("n_cases", 1))
    base = SynthConfig.from_json(raw)
    out = Path(args.out)
    for i in range(n_cases):
        cfg = SynthConfig(**{**{f.name: getattr(base, f.name)
                                for f in fields(SynthConfig)}, "seed": base.seed + i})
        case = synth_case(cfg)
        write_case(case, out / f"case_{i:03d}")
    print(f"wrote {n_cases} case(s) under {out}")
    return 0


def _cmd_augment(args) -> int:
    taxonomy = sio.load_taxonomy(args.taxonomy)
    refined_sets = []
    root = Path(args.pool_from)
    for path in sorted(root.rglob("*.refined.json")):
        _, _, _, image, rs = sio.load_refined_set(path)
        if image is None:
            continue
        img_path = Path(image)
        if not img_path.is_absolute() and not img_path.exists():
            img_path = path.parent / img_path
        refined_sets.append((str(img_path), rs))
    if not refined_sets:
        raise SecoError(f"no usable *.refined.json under {root}")
    pool = build_resample_pool(refined_sets, taxonomy)
    dst_image = sio.load_rgb(args.dst_image)
    dst_label = sio.load_label_map(args.dst_label, taxonomy)
    out_img, out_lab = copy_paste(pool, dst_image, dst_label, args.seed,
                                  n_paste=args.n_paste, placement=args.placement)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.dst_image).stem
    sio.save_rgb(out_img, out / f"{stem}.augmented.png")
    sio.save_label_map(out_lab, out / f"{stem}.augmented_label.png")
    print(f"pasted {args.n_paste} connectivities -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seco",
                     description="Refine speckled pixel pseudo-labels into "
                                 "region-level, low-noise pseudo-labels.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("psa",
                       help="aggregate a pseudo-label into labeled regions")
    p.add_argument("--image", required=True)
    p.add_argument("--pseudo", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--backend", help="file:DIR or http://HOST:PORT (default $SECO_BACKEND)")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    _add_psa_flags(p)
    p.set_defaults(func=_cmd_psa)

    p = sub.add_parser("scc",
                       help="score regions, model the loss distribution, keep/correct/drop")
    p.add_argument("--connectivities", required=True)
    p.add_argument("--features", required=True,
                   help="handcrafted:IMAGE or file:FEATURES")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    _add_scc_flags(p)
    p.set_defaults(func=_cmd_scc)

    p = sub.add_parser("refine",
                       help="psa then scc over a manifest of images")
    p.add_argument("--manifest", required=True,
                   help="JSON list of {image, pseudo, out} entries")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--backend")
    p.add_argument("--workers", type=int, default=0,
                   help="parallel images (default: CPU count)")
    p.add_argument("--gmm-per-image", action="store_true",
                   help="fit the loss mixture per image instead of over the whole run")
    p.add_argument("--config")
    _add_psa_flags(p)
    _add_scc_flags(p)
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("eval", help="score a prediction against GT")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate synthetic cases")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("augment",
                       help="copy-paste minority-class regions onto an image/label pair")
    p.add_argument("--pool-from", dest="pool_from", required=True)
    p.add_argument("--dst-image", dest="dst_image", required=True)
    p.add_argument("--dst-label", dest="dst_label", required=True)
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-paste", dest="n_paste", type=int, default=1)
    p.add_argument("--placement", choices=("original", "uniform-random"),
                   default="original")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_augment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BackendUnavailable as e:
        print(f"seco: backend unavailable: {e}", file=sys.stderr)
        return 3
    except SecoError as e:
        print(f"seco: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
