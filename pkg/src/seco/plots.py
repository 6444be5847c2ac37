"""Report figures (rendered to files, never shown)."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure  # noqa: E402

from .types import Connectivity, GmmFit

# strip the Software key so repeated runs write byte-identical PNGs
_PNG_META = {"Software": None}


def write_loss_csv(conns: Sequence[Connectivity], partitions: dict[int, str], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label", "loss", "eta", "max_prob", "partition"])
        for c in sorted(conns, key=lambda c: c.id):
            writer.writerow([
                c.id, c.label,
                "" if c.loss is None else repr(float(c.loss)),
                "" if c.eta is None else repr(float(c.eta)),
                "" if c.probs is None else repr(float(c.max_prob)),
                partitions.get(c.id, ""),
            ])


def plot_loss_histogram(losses: Sequence[float], gmm: Optional[GmmFit], path,
                        title: str = "connectivity loss distribution") -> None:
    """Histogram of per-connectivity losses with the fitted mixture overlaid."""
    losses = np.asarray(losses, dtype=np.float64)
    fig = Figure(figsize=(6, 4), dpi=120)
    ax = fig.add_subplot(111)
    if losses.size:
        ax.hist(losses, bins=min(40, max(10, losses.size // 5)), density=True,
                color="#7aa6c2", edgecolor="white", label="losses")
        if gmm is not None:
            xs = np.linspace(float(losses.min()), float(losses.max()), 400)
            total = np.zeros_like(xs)
            for wgt, mu, var, name in zip(gmm.weights, gmm.means, gmm.variances,
                                          ("low", "high")):
                pdf = wgt * np.exp(-0.5 * (xs - mu) ** 2 / var) / np.sqrt(2 * np.pi * var)
                total += pdf
                ax.plot(xs, pdf, lw=1.5, label=f"{name} component")
            ax.plot(xs, total, "k--", lw=1.0, label="mixture")
        ax.legend(fontsize=8)
    ax.set_xlabel("cross-entropy loss")
    ax.set_ylabel("density")
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(Path(path), format="png", metadata=_PNG_META)
