"""File codecs: label-map PNGs, taxonomy / mask / connectivity JSON, feature binaries.

All writers emit canonical bytes (sorted JSON keys, fixed separators) so that
re-running a pipeline overwrites its outputs byte-identically.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    BadMagic,
    FormatError,
    NonFiniteValue,
    TruncatedFile,
)
from .types import (
    ClassDef,
    Connectivity,
    FeatureMap,
    LabelMap,
    MaskEntry,
    MaskRLE,
    MaskSet,
    RefinedSet,
    Taxonomy,
)

PathLike = Union[str, Path]

FEATURE_MAGIC = b"SECOFM1\x00"


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(obj, path: PathLike) -> None:
    Path(path).write_text(dumps_canonical(obj), encoding="utf-8")


def read_json(path: PathLike):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON ({e})") from e


# --- label maps ---------------------------------------------------------

def load_label_map(path: PathLike, taxonomy: Optional[Taxonomy] = None) -> LabelMap:
    """Read an 8-bit grayscale PNG; optionally validate values against a taxonomy."""
    try:
        img = Image.open(path)
    except (UnidentifiedImageError, OSError) as e:
        raise FormatError(f"{path}: not a readable image ({e})") from e
    if img.format != "PNG" or img.mode != "L":
        raise FormatError(f"{path}: expected 8-bit grayscale PNG, got {img.format}/{img.mode}")
    lm = LabelMap(np.asarray(img, dtype=np.uint8))
    if taxonomy is not None:
        lm.validate_classes(taxonomy)
    return lm


def save_label_map(label_map: LabelMap, path: PathLike) -> None:
    Image.fromarray(np.asarray(label_map.data), mode="L").save(path, format="PNG")


def load_rgb(path: PathLike) -> np.ndarray:
    """Read an RGB PNG as (H, W, 3) uint8."""
    try:
        img = Image.open(path)
    except (UnidentifiedImageError, OSError) as e:
        raise FormatError(f"{path}: not a readable image ({e})") from e
    return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_rgb(image: np.ndarray, path: PathLike) -> None:
    a = np.asarray(image, dtype=np.uint8)
    if a.ndim != 3 or a.shape[2] != 3:
        raise FormatError("expected an (H, W, 3) image")
    Image.fromarray(a, mode="RGB").save(path, format="PNG")


# --- taxonomy -----------------------------------------------------------

def load_taxonomy(path: PathLike) -> Taxonomy:
    raw = read_json(path)
    if not isinstance(raw, list):
        raise FormatError(f"{path}: taxonomy must be a JSON list")
    try:
        classes = tuple(ClassDef(name=e["name"], kind=e["kind"]) for e in raw)
    except (TypeError, KeyError) as e:
        raise FormatError(f"{path}: taxonomy entries need 'name' and 'kind'") from e
    return Taxonomy(classes)


def save_taxonomy(taxonomy: Taxonomy, path: PathLike) -> None:
    write_json([{"name": c.name, "kind": c.kind} for c in taxonomy.classes], path)


# --- mask sets ----------------------------------------------------------

def rle_to_json(rle: MaskRLE) -> dict:
    return {"height": rle.height, "width": rle.width, "counts": list(rle.counts)}


def rle_from_json(obj: dict) -> MaskRLE:
    try:
        return MaskRLE(height=int(obj["height"]), width=int(obj["width"]),
                       counts=tuple(int(c) for c in obj["counts"]))
    except (TypeError, KeyError, ValueError) as e:
        raise FormatError(f"bad RLE object: {e}") from e


def mask_set_to_json(ms: MaskSet) -> dict:
    return {
        "image_id": ms.image_id,
        "height": ms.height,
        "width": ms.width,
        "masks": [
            {"id": m.id, "source": m.source, "rle": rle_to_json(m.rle)}
            for m in ms.masks
        ],
    }


def mask_set_from_json(obj: dict) -> MaskSet:
    try:
        masks = tuple(
            MaskEntry(id=int(m["id"]), rle=rle_from_json(m["rle"]), source=m["source"])
            for m in obj["masks"]
        )
        return MaskSet(image_id=obj["image_id"], height=int(obj["height"]),
                       width=int(obj["width"]), masks=masks)
    except (TypeError, KeyError) as e:
        raise FormatError(f"bad mask set object: {e}") from e


def load_mask_set(path: PathLike) -> MaskSet:
    return mask_set_from_json(read_json(path))


def save_mask_set(ms: MaskSet, path: PathLike) -> None:
    write_json(mask_set_to_json(ms), path)


# --- connectivities and refined sets -------------------------------------

def connectivity_to_json(c: Connectivity) -> dict:
    out = {
        "id": c.id,
        "label": c.label,
        "provenance": c.provenance,
        "area": c.area,
        "rle": rle_to_json(c.mask),
    }
    if c.seed_area is not None:
        out["seed_area"] = c.seed_area
    if c.loss is not None:
        out["loss"] = float(c.loss)
    if c.eta is not None:
        out["eta"] = float(c.eta)
    if c.probs is not None:
        out["probs"] = [float(p) for p in c.probs]
    return out


def connectivity_from_json(obj: dict) -> Connectivity:
    try:
        return Connectivity(
            id=int(obj["id"]),
            mask=rle_from_json(obj["rle"]),
            label=int(obj["label"]),
            provenance=obj["provenance"],
            area=int(obj["area"]),
            seed_area=obj.get("seed_area"),
            loss=obj.get("loss"),
            eta=obj.get("eta"),
            probs=np.asarray(obj["probs"], dtype=np.float64) if "probs" in obj else None,
        )
    except (TypeError, KeyError) as e:
        raise FormatError(f"bad connectivity object: {e}") from e


def connectivities_to_json(conns, image_id: str, height: int, width: int,
                           image: Optional[str] = None) -> dict:
    out = {
        "image_id": image_id,
        "height": height,
        "width": width,
        "connectivities": [connectivity_to_json(c) for c in conns],
    }
    if image is not None:
        out["image"] = image
    return out


def load_connectivities(path: PathLike):
    """Returns (image_id, height, width, image_path_or_None, list of Connectivity)."""
    obj = read_json(path)
    try:
        conns = [connectivity_from_json(c) for c in obj["connectivities"]]
        return (obj["image_id"], int(obj["height"]), int(obj["width"]),
                obj.get("image"), conns)
    except (TypeError, KeyError) as e:
        raise FormatError(f"{path}: bad connectivities file ({e})") from e


def refined_set_to_json(rs: RefinedSet, image_id: str, height: int, width: int,
                        image: Optional[str] = None) -> dict:
    entries = []
    for part, conns in (("clean", rs.clean), ("corrected", rs.corrected),
                        ("dropped", rs.dropped)):
        for c in conns:
            e = connectivity_to_json(c)
            e["partition"] = part
            entries.append(e)
    entries.sort(key=lambda e: e["id"])
    out = {
        "image_id": image_id,
        "height": height,
        "width": width,
        "tau_ns": rs.tau_ns,
        "tau_cr": rs.tau_cr,
        "connectivities": entries,
    }
    if image is not None:
        out["image"] = image
    return out


def load_refined_set(path: PathLike):
    """Returns (image_id, height, width, image_path_or_None, RefinedSet)."""
    obj = read_json(path)
    try:
        buckets = {"clean": [], "corrected": [], "dropped": []}
        for e in obj["connectivities"]:
            buckets[e["partition"]].append(connectivity_from_json(e))
        rs = RefinedSet(clean=tuple(buckets["clean"]),
                        corrected=tuple(buckets["corrected"]),
                        dropped=tuple(buckets["dropped"]),
                        tau_ns=float(obj["tau_ns"]), tau_cr=float(obj["tau_cr"]))
        return obj["image_id"], int(obj["height"]), int(obj["width"]), obj.get("image"), rs
    except (TypeError, KeyError) as e:
        raise FormatError(f"{path}: bad refined-set file ({e})") from e


# --- feature maps ---------------------------------------------------------

def load_feature_map(path: PathLike) -> FeatureMap:
    """Read the flat binary feature format: magic, u32 H W D, then H*W*D f32 (LE)."""
    blob = Path(path).read_bytes()
    if blob[:8] != FEATURE_MAGIC:
        raise BadMagic(f"{path}: missing {FEATURE_MAGIC!r} header")
    if len(blob) < 8 + 12:
        raise TruncatedFile(f"{path}: header truncated")
    h, w, d = struct.unpack("<III", blob[8:20])
    expected = 8 + 12 + h * w * d * 4
    if len(blob) < expected:
        raise TruncatedFile(f"{path}: payload shorter than {h}x{w}x{d} floats")
    if len(blob) > expected:
        raise FormatError(f"{path}: trailing bytes after payload")
    data = np.frombuffer(blob, dtype="<f4", count=h * w * d, offset=20)
    if not np.isfinite(data).all():
        raise NonFiniteValue(f"{path}: payload contains NaN or Inf")
    return FeatureMap(data.reshape(h, w, d))


def save_feature_map(fm: FeatureMap, path: PathLike) -> None:
    header = FEATURE_MAGIC + struct.pack("<III", fm.height, fm.width, fm.depth)
    payload = np.ascontiguousarray(fm.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)
