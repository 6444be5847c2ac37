"""Semantic connectivity correction.

Each aggregated region becomes one training item of a K-way linear softmax
classifier: its feature vector is the mean of per-pixel features under its
mask, its target is its (possibly noisy) region label. The classifier is
stopped early, after a fixed iteration budget, so items with wrong labels
are still poorly fit and sit in the high mode of the per-item loss
distribution. A two-component Gaussian mixture over the losses turns each
loss into a noise probability eta; thresholds on eta and on the classifier
confidence then keep, relabel, or drop each region.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateDataset,
    DimMismatch,
    EmptyMask,
    TooFewSamples,
)
from .rle import rle_decode
from .types import (
    VOID,
    VARIANCE_FLOOR,
    Connectivity,
    FeatureMap,
    GmmFit,
    LabelMap,
    PROV_CORRECTED,
    RefinedSet,
    SccConfig,
)

log = logging.getLogger(__name__)

HANDCRAFTED_DEPTH = 7

# BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


def extract_features(source, mode: str = "handcrafted") -> FeatureMap:
    """Per-pixel features for the classifier.

    handcrafted mode takes an (H, W, 3) uint8 image (or a PNG path) and
    emits 7 channels per pixel: x/W, y/H, R, G, B in [0, 1], luma, and the
    3x3 local luma standard deviation (windows clipped at borders,
    population std). file mode loads a precomputed feature binary.
    """
    if mode == "file":
        from . import io as sio

        return sio.load_feature_map(source)
    if mode != "handcrafted":
        raise ValueError(f"unknown feature mode {mode!r}")
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        from . import io as sio

        source = sio.load_rgb(source)
    rgb = np.asarray(source, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("handcrafted features need an (H, W, 3) image")
    h, w = rgb.shape[:2]
    rgb = rgb / 255.0
    gray = rgb @ _LUMA

    # windowed mean/variance with zero padding plus an in-bounds pixel count,
    # so border windows use only real pixels
    ones = np.ones((h, w))
    n = ndimage.uniform_filter(ones, size=3, mode="constant", cval=0.0) * 9.0
    s1 = ndimage.uniform_filter(gray, size=3, mode="constant", cval=0.0) * 9.0
    s2 = ndimage.uniform_filter(gray * gray, size=3, mode="constant", cval=0.0) * 9.0
    mean = s1 / n
    var = np.clip(s2 / n - mean * mean, 0.0, None)
    local_std = np.sqrt(var)

    xx = np.broadcast_to(np.arange(w, dtype=np.float64) / w, (h, w))
    yy = np.broadcast_to((np.arange(h, dtype=np.float64) / h)[:, None], (h, w))
    stack = np.stack([xx, yy, rgb[..., 0], rgb[..., 1], rgb[..., 2], gray, local_std], axis=-1)
    return FeatureMap(stack.astype(np.float32))


def pool_features(fm: FeatureMap, mask) -> np.ndarray:
    """Mean feature vector over the mask pixels (float64, length D)."""
    m = rle_decode(mask) if not isinstance(mask, np.ndarray) else np.asarray(mask, dtype=bool)
    if m.shape != (fm.height, fm.width):
        raise DimMismatch("mask dims differ from feature-map dims")
    if not m.any():
        raise EmptyMask("cannot pool an empty mask")
    return fm.data[m].astype(np.float64).mean(axis=0)


@dataclass(frozen=True)
class ClassifierHead:
    """Linear softmax head plus the feature standardization it was trained with."""

    weights: np.ndarray  # (D, K)
    bias: np.ndarray  # (K,)
    feat_mean: np.ndarray  # (D,)
    feat_std: np.ndarray  # (D,)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]

    def predict_proba(self, vectors: np.ndarray) -> np.ndarray:
        x = (np.atleast_2d(np.asarray(vectors, dtype=np.float64)) - self.feat_mean) / self.feat_std
        logits = x @ self.weights + self.bias
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)


def _split_items(items) -> tuple[np.ndarray, np.ndarray]:
    vecs = np.asarray([np.asarray(v, dtype=np.float64) for v, _ in items])
    labels = np.asarray([int(lbl) for _, lbl in items], dtype=np.int64)
    return vecs, labels


def train_classifier(items: Sequence, cfg: SccConfig = SccConfig(),
                     n_classes: Optional[int] = None) -> ClassifierHead:
    """Minibatch SGD with momentum on cross-entropy for exactly cfg.warmup_iters steps.

    items is a sequence of (pooled vector, label). There is deliberately no
    convergence criterion: the point of the fixed budget is to stop while
    wrongly labeled items are still badly fit. Channels are z-scored over
    the training pool; the standardization ships with the head. Fully
    deterministic given cfg.seed.
    """
    x, y = _split_items(items)
    if np.unique(y).size < 2:
        raise DegenerateDataset("training needs at least two distinct labels")
    k = int(n_classes) if n_classes is not None else int(y.max()) + 1
    if y.max() >= k:
        raise ValueError("label outside [0, n_classes)")
    n, d = x.shape

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    xs = (x - mean) / std

    rng = np.random.default_rng(cfg.seed)
    bs = min(cfg.batch_size, n)
    w = np.zeros((d, k))
    b = np.zeros(k)
    vw = np.zeros_like(w)
    vb = np.zeros_like(b)
    perm = rng.permutation(n)
    ptr = 0
    for _ in range(cfg.warmup_iters):
        if ptr + bs > n:
            perm = rng.permutation(n)
            ptr = 0
        idx = perm[ptr:ptr + bs]
        ptr += bs
        xb, yb = xs[idx], y[idx]
        logits = xb @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        p = e / e.sum(axis=1, keepdims=True)
        g = p
        g[np.arange(len(yb)), yb] -= 1.0
        g /= len(yb)
        vw = cfg.momentum * vw + xb.T @ g
        vb = cfg.momentum * vb + g.sum(axis=0)
        w = w - cfg.learning_rate * vw
        b = b - cfg.learning_rate * vb
    return ClassifierHead(weights=w, bias=b, feat_mean=mean, feat_std=std)


def per_connectivity_loss(head: ClassifierHead, items: Sequence) -> np.ndarray:
    """Cross-entropy of each item's own label: -log p(label)."""
    x, y = _split_items(items)
    probs = head.predict_proba(x)
    p = np.clip(probs[np.arange(len(y)), y], 1e-300, None)
    return -np.log(p)


# --- loss-distribution modeling ------------------------------------------

def _log_normal_pdf(x: np.ndarray, mean: float, var: float) -> np.ndarray:
    return -0.5 * (np.log(2.0 * math.pi * var) + (x - mean) ** 2 / var)


def _mixture_ll(x, weights, means, variances) -> tuple[float, np.ndarray]:
    comp = np.stack([
        np.log(weights[c]) + _log_normal_pdf(x, means[c], variances[c])
        for c in range(2)
    ], axis=1)
    m = comp.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(comp - m).sum(axis=1))
    resp = np.exp(comp - lse[:, None])
    return float(lse.sum()), resp


def fit_gmm2(losses, cfg: SccConfig = SccConfig()) -> GmmFit:
    """EM fit of a two-component 1-D Gaussian mixture.

    Init: means at the 25th/75th percentiles, equal weights, both variances
    at the sample variance. Stops when the log-likelihood moves less than
    cfg.em_tol or after cfg.em_max_iters updates. Variances are floored at
    1e-8; components come back ordered by mean.
    """
    x = np.asarray(losses, dtype=np.float64).ravel()
    if x.size < 8:
        raise TooFewSamples(f"need >= 8 samples, got {x.size}")
    means = np.percentile(x, [25.0, 75.0]).astype(np.float64)
    variances = np.full(2, max(float(x.var()), VARIANCE_FLOOR))
    weights = np.array([0.5, 0.5])

    ll, resp = _mixture_ll(x, weights, means, variances)
    history = [ll]
    iterations = 0
    for _ in range(cfg.em_max_iters):
        nk = np.clip(resp.sum(axis=0), 1e-300, None)
        weights = nk / x.size
        means = (resp * x[:, None]).sum(axis=0) / nk
        variances = np.clip((resp * (x[:, None] - means) ** 2).sum(axis=0) / nk,
                            VARIANCE_FLOOR, None)
        ll, resp = _mixture_ll(x, weights, means, variances)
        history.append(ll)
        iterations += 1
        if abs(history[-1] - history[-2]) < cfg.em_tol:
            break

    order = np.argsort(means, kind="stable")
    return GmmFit(
        weights=tuple(weights[order]),
        means=tuple(means[order]),
        variances=tuple(variances[order]),
        log_likelihood=ll,
        iterations=iterations,
        ll_history=tuple(history),
    )


def noise_posterior(gmm: GmmFit, loss: float) -> float:
    """Posterior responsibility of the higher-mean component at `loss`."""
    x = np.asarray([loss], dtype=np.float64)
    _, resp = _mixture_ll(x, np.asarray(gmm.weights), np.asarray(gmm.means),
                          np.asarray(gmm.variances))
    return float(resp[0, 1])


def noise_posteriors(gmm: GmmFit, losses) -> np.ndarray:
    x = np.asarray(losses, dtype=np.float64).ravel()
    _, resp = _mixture_ll(x, np.asarray(gmm.weights), np.asarray(gmm.means),
                          np.asarray(gmm.variances))
    return resp[:, 1]


# --- selection and rendering ----------------------------------------------

def attach_statistics(conns: Sequence[Connectivity], losses, etas, probs) -> list[Connectivity]:
    """New Connectivity instances with loss / eta / probs filled in."""
    out = []
    for c, loss, eta, p in zip(conns, losses, etas, probs):
        out.append(replace(c, loss=float(loss), eta=float(eta),
                           probs=np.asarray(p, dtype=np.float64)))
    return out


def select_and_correct(conns: Sequence[Connectivity], cfg: SccConfig = SccConfig()) -> RefinedSet:
    """Partition scored connectivities.

    eta < tau_ns keeps the label; otherwise a confident classifier
    (max prob > tau_cr) relabels to its argmax class, and everything else
    is dropped.
    """
    clean, corrected, dropped = [], [], []
    for c in conns:
        if c.loss is None or c.eta is None or c.probs is None:
            from .types import raise_missing

            raise_missing(c.id, "loss/eta/probs statistics")
        if c.eta < cfg.tau_ns:
            clean.append(c)
        elif c.max_prob > cfg.tau_cr:
            corrected.append(replace(c, label=c.argmax_class, provenance=PROV_CORRECTED))
        else:
            dropped.append(c)
    return RefinedSet(clean=tuple(clean), corrected=tuple(corrected),
                      dropped=tuple(dropped), tau_ns=cfg.tau_ns, tau_cr=cfg.tau_cr)


def render_pseudo_label(refined: RefinedSet, dims: tuple[int, int]) -> LabelMap:
    """Rasterize kept and corrected connectivities.

    Overlapping pixels go to the connectivity with the higher classifier
    confidence (ties: lower id); unpainted pixels are void.
    """
    h, w = dims
    canvas = np.full((h, w), VOID, dtype=np.uint8)
    # paint in ascending (confidence, -id) order so the winner paints last
    for c in sorted(refined.all_kept, key=lambda c: (c.max_prob, -c.id)):
        canvas[rle_decode(c.mask)] = c.label
    return LabelMap(canvas)


# --- orchestration ---------------------------------------------------------

def score_connectivities(
    conns: Sequence[Connectivity],
    vectors: np.ndarray,
    cfg: SccConfig = SccConfig(),
    n_classes: Optional[int] = None,
) -> tuple[list[Connectivity], Optional[GmmFit], Optional[ClassifierHead]]:
    """Train, compute per-item losses and noise posteriors, attach them.

    Degenerate pools (a single distinct label, or fewer than 8 items for the
    mixture) skip what cannot be estimated: every connectivity is kept with
    eta = 0 and, when training was impossible, a one-hot probability on its
    own label.
    """
    conns = list(conns)
    if not conns:
        return [], None, None
    labels = np.asarray([c.label for c in conns], dtype=np.int64)
    k = int(n_classes) if n_classes is not None else int(labels.max()) + 1
    items = list(zip(vectors, labels))

    if np.unique(labels).size < 2:
        log.warning("connectivity pool has a single label; keeping everything")
        eye = np.eye(k)
        scored = attach_statistics(conns, np.zeros(len(conns)), np.zeros(len(conns)),
                                   eye[labels])
        return scored, None, None

    head = train_classifier(items, cfg, n_classes=k)
    losses = per_connectivity_loss(head, items)
    probs = head.predict_proba(np.asarray([v for v, _ in items]))

    if len(conns) < 8:
        log.warning("only %d connectivities; skipping mixture fit, keeping everything",
                    len(conns))
        scored = attach_statistics(conns, losses, np.zeros(len(conns)), probs)
        return scored, None, head

    gmm = fit_gmm2(losses, cfg)
    etas = noise_posteriors(gmm, losses)
    scored = attach_statistics(conns, losses, etas, probs)
    return scored, gmm, head
