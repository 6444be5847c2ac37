"""Domain types shared by all stages.

Everything here is immutable after construction; numpy payloads are marked
read-only so instances can be shared across threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, FormatError, RleError, SumMismatch

VOID = 255  # reserved void / unlabeled value, caps K at 254

STUFF = "stuff"
THINGS = "things"

PROV_THINGS = "things_prompt"
PROV_STUFF = "stuff_align"
PROV_CORRECTED = "corrected"


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabelMap:
    """H x W raster of class indices in [0, K) plus VOID=255."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.uint8)
        if a.ndim != 2 or a.size == 0:
            raise FormatError("label map must be a non-empty 2-D raster")
        object.__setattr__(self, "data", _freeze(a))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def validate_classes(self, taxonomy: "Taxonomy") -> None:
        from .errors import ClassOutOfRange

        bad = np.unique(self.data[(self.data >= taxonomy.k) & (self.data != VOID)])
        if bad.size:
            raise ClassOutOfRange(
                f"label values {bad.tolist()} outside [0, {taxonomy.k}) and not void"
            )


@dataclass(frozen=True)
class ClassDef:
    name: str
    kind: str  # STUFF or THINGS


@dataclass(frozen=True)
class Taxonomy:
    """Ordered class list; the index of a class is its raster value."""

    classes: tuple[ClassDef, ...]

    def __post_init__(self):
        classes = tuple(self.classes)
        if not classes:
            raise ConfigError("taxonomy needs at least one class")
        if len(classes) > 254:
            raise ConfigError("at most 254 classes (255 is reserved for void)")
        names = [c.name for c in classes]
        if len(set(names)) != len(names):
            raise ConfigError("class names must be unique")
        for c in classes:
            if c.kind not in (STUFF, THINGS):
                raise ConfigError(f"class {c.name!r} has unknown kind {c.kind!r}")
        object.__setattr__(self, "classes", classes)

    @property
    def k(self) -> int:
        return len(self.classes)

    def ids_of_kind(self, kind: str) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.classes) if c.kind == kind)

    @property
    def stuff_ids(self) -> tuple[int, ...]:
        return self.ids_of_kind(STUFF)

    @property
    def things_ids(self) -> tuple[int, ...]:
        return self.ids_of_kind(THINGS)


@dataclass(frozen=True)
class MaskRLE:
    """Column-major run-length encoding of a binary mask.

    counts alternate zero-run / one-run; the first entry is the leading
    zero-run and is the only one allowed to be 0.
    """

    height: int
    width: int
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise RleError("mask dims must be positive")
        counts = tuple(int(c) for c in self.counts)
        if not counts:
            raise RleError("counts must be non-empty")
        if any(c < 0 for c in counts):
            raise RleError("negative run length")
        if any(c == 0 for c in counts[1:]):
            raise RleError("zero-length interior run")
        if sum(counts) != self.height * self.width:
            raise SumMismatch(
                f"counts sum {sum(counts)} != {self.height}x{self.width}"
            )
        object.__setattr__(self, "counts", counts)

    @property
    def area(self) -> int:
        return sum(self.counts[1::2])


@dataclass(frozen=True)
class MaskEntry:
    id: int
    rle: MaskRLE
    source: str  # "auto" or "prompt"


@dataclass(frozen=True)
class MaskSet:
    """Class-agnostic mask proposals for one image."""

    image_id: str
    height: int
    width: int
    masks: tuple[MaskEntry, ...]

    def __post_init__(self):
        masks = tuple(self.masks)
        ids = [m.id for m in masks]
        if any(i < 0 for i in ids):
            raise FormatError("mask ids must be non-negative")
        if len(set(ids)) != len(ids):
            raise FormatError("mask ids must be unique")
        for m in masks:
            if (m.rle.height, m.rle.width) != (self.height, self.width):
                raise FormatError(f"mask {m.id} dims differ from set dims")
        object.__setattr__(self, "masks", masks)


@dataclass(frozen=True)
class BBox:
    """Inclusive pixel box."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (0 <= self.x0 <= self.x1 and 0 <= self.y0 <= self.y1):
            raise ConfigError(f"degenerate box {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    def contains(self, other: "BBox") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and self.x1 >= other.x1 and self.y1 >= other.y1)


@dataclass(frozen=True)
class Point:
    x: int
    y: int


@dataclass(frozen=True)
class FeatureMap:
    """Per-pixel feature raster, H x W x D float32, all finite."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float32)
        if a.ndim != 3 or a.size == 0:
            raise FormatError("feature map must be H x W x D")
        from .errors import NonFiniteValue

        if not np.isfinite(a).all():
            raise NonFiniteValue("feature map contains NaN or Inf")
        object.__setattr__(self, "data", _freeze(a))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def depth(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Connectivity:
    """One aggregated region with its label and, once scored, noise statistics.

    seed_area is the area of the pixel component that prompted the region
    (things branch only); it drives duplicate resolution during merging.
    """

    id: int
    mask: MaskRLE
    label: int
    provenance: str  # PROV_THINGS, PROV_STUFF or PROV_CORRECTED
    area: int
    seed_area: Optional[int] = None
    loss: Optional[float] = None
    eta: Optional[float] = None
    probs: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.area < 1 or self.area != self.mask.area:
            raise FormatError(f"connectivity {self.id}: area does not match mask")
        if self.eta is not None and not (0.0 <= self.eta <= 1.0):
            raise FormatError(f"connectivity {self.id}: eta outside [0, 1]")
        if self.probs is not None:
            p = _freeze(np.asarray(self.probs, dtype=np.float64))
            if abs(float(p.sum()) - 1.0) > 1e-6:
                raise FormatError(f"connectivity {self.id}: probs do not sum to 1")
            object.__setattr__(self, "probs", p)

    @property
    def max_prob(self) -> float:
        if self.probs is None:
            raise_missing(self.id, "probs")
        return float(self.probs.max())

    @property
    def argmax_class(self) -> int:
        if self.probs is None:
            raise_missing(self.id, "probs")
        return int(self.probs.argmax())


def raise_missing(conn_id: int, what: str):
    from .errors import MissingStatistics

    raise MissingStatistics(f"connectivity {conn_id} has no {what}")


VARIANCE_FLOOR = 1e-8


@dataclass(frozen=True)
class GmmFit:
    """Two-component 1-D Gaussian mixture, components ordered by mean."""

    weights: tuple[float, float]
    means: tuple[float, float]
    variances: tuple[float, float]
    log_likelihood: float
    iterations: int
    ll_history: tuple[float, ...] = ()

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        m = tuple(float(x) for x in self.means)
        v = tuple(float(x) for x in self.variances)
        if min(w) <= 0 or abs(sum(w) - 1.0) > 1e-9:
            raise ConfigError("component weights must be positive and sum to 1")
        if min(v) < VARIANCE_FLOOR * (1 - 1e-12):
            raise ConfigError("variance below floor")
        if m[0] > m[1]:
            raise ConfigError("components must be ordered by mean")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)
        object.__setattr__(self, "ll_history", tuple(float(x) for x in self.ll_history))


@dataclass(frozen=True)
class RefinedSet:
    """Partition of scored connectivities into kept / relabeled / discarded."""

    clean: tuple[Connectivity, ...]
    corrected: tuple[Connectivity, ...]
    dropped: tuple[Connectivity, ...]
    tau_ns: float
    tau_cr: float

    def __post_init__(self):
        object.__setattr__(self, "clean", tuple(self.clean))
        object.__setattr__(self, "corrected", tuple(self.corrected))
        object.__setattr__(self, "dropped", tuple(self.dropped))
        ids = [c.id for c in self.clean + self.corrected + self.dropped]
        if len(set(ids)) != len(ids):
            raise FormatError("refined partition repeats a connectivity id")
        for c in self.clean:
            if not (c.eta < self.tau_ns):
                raise FormatError(f"clean connectivity {c.id} has eta >= tau_ns")
        for c in self.corrected:
            if not (c.eta >= self.tau_ns and c.max_prob > self.tau_cr):
                raise FormatError(f"corrected connectivity {c.id} fails its gates")
        for c in self.dropped:
            if not (c.eta >= self.tau_ns and c.max_prob <= self.tau_cr):
                raise FormatError(f"dropped connectivity {c.id} fails its gates")

    @property
    def all_kept(self) -> tuple[Connectivity, ...]:
        """Union of the kept and corrected sets."""
        return self.clean + self.corrected


@dataclass(frozen=True)
class SccConfig:
    """Knobs for the correction stage (defaults match the shipped tooling)."""

    tau_ns: float = 0.60
    tau_cr: float = 0.95
    warmup_iters: int = 5000
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    em_max_iters: int = 100
    em_tol: float = 1e-6

    def __post_init__(self):
        if not (0.0 < self.tau_ns < 1.0 and 0.0 < self.tau_cr < 1.0):
            raise ConfigError("thresholds must lie strictly inside (0, 1)")
        if self.warmup_iters < 1:
            raise ConfigError("warmup_iters must be >= 1")
        if self.batch_size < 1 or self.em_max_iters < 1:
            raise ConfigError("batch_size and em_max_iters must be >= 1")


@dataclass(frozen=True)
class PsaConfig:
    """Knobs for the aggregation stage."""

    area_factor: float = 1.5
    min_seed_area: int = 16
    min_labeled_frac: float = 0.01
    overlap_thresh: float = 0.5
    min_area: int = 16
    adjacency: int = 8

    def __post_init__(self):
        if self.area_factor < 1.0:
            raise ConfigError("area_factor must be >= 1")
        if self.adjacency not in (4, 8):
            raise ConfigError("adjacency must be 4 or 8")
        if not (0.0 <= self.min_labeled_frac <= 1.0 and 0.0 <= self.overlap_thresh <= 1.0):
            raise ConfigError("fractions must lie in [0, 1]")
