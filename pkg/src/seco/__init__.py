"""seco: refine speckled pixel pseudo-labels into region-level pseudo-labels.

Two stages: aggregation groups reliable pixels into labeled regions through
a promptable mask backend, and correction detects / fixes region-level label
noise from the loss distribution of an early-stopped region classifier.
"""
from .types import (
    VOID,
    BBox,
    ClassDef,
    Connectivity,
    FeatureMap,
    GmmFit,
    LabelMap,
    MaskEntry,
    MaskRLE,
    MaskSet,
    Point,
    PsaConfig,
    RefinedSet,
    SccConfig,
    Taxonomy,
)
from .rle import rle_decode, rle_encode
from .components import Component, connected_components, enlarge_box, mask_iou
from .backend import FileBackend, HttpBackend, open_backend, resolve_prompt
from .psa import aggregate_things, align_stuff, merge_connectivities, run_psa
from .scc import (
    ClassifierHead,
    extract_features,
    fit_gmm2,
    noise_posterior,
    per_connectivity_loss,
    pool_features,
    render_pseudo_label,
    select_and_correct,
    train_classifier,
)
from .metrics import Metrics, connectivity_label_accuracy, evaluate
from .synth import SynthCase, SynthConfig, synth_case, write_case
from .augment import build_resample_pool, copy_paste

__version__ = "0.1.0"

__all__ = [
    "VOID", "BBox", "ClassDef", "Connectivity", "FeatureMap", "GmmFit",
    "LabelMap", "MaskEntry", "MaskRLE", "MaskSet", "Point", "PsaConfig",
    "RefinedSet", "SccConfig", "Taxonomy",
    "rle_decode", "rle_encode",
    "Component", "connected_components", "enlarge_box", "mask_iou",
    "FileBackend", "HttpBackend", "open_backend", "resolve_prompt",
    "aggregate_things", "align_stuff", "merge_connectivities", "run_psa",
    "ClassifierHead", "extract_features", "fit_gmm2", "noise_posterior",
    "per_connectivity_loss", "pool_features", "render_pseudo_label",
    "select_and_correct", "train_classifier",
    "Metrics", "connectivity_label_accuracy", "evaluate",
    "SynthCase", "SynthConfig", "synth_case", "write_case",
    "build_resample_pool", "copy_paste",
]
