"""Promptable-mask backends.

Two implementations of the same interface: `FileBackend` serves precomputed
proposal sets from disk and emulates prompting by scoring the pool against
the prompt, `HttpBackend` talks to a mask service over the wire protocol
(POST /v1/auto_masks and /v1/segment).
"""
from __future__ import annotations

import base64
import threading
from functools import lru_cache
from pathlib import Path
from typing import Optional, Protocol

import requests

from . import io as sio
from .components import box_interior_mask
from .errors import (
    BackendError,
    BackendUnavailable,
    DimMismatch,
    EmptyPool,
    EmptyResult,
    ImageNotFound,
)
from .rle import rle_decode
from .types import BBox, MaskRLE, MaskSet, Point


class SegmenterBackend(Protocol):
    supports_auto: bool
    supports_prompt: bool

    def auto_masks(self, image_ref: str, expect_dims: Optional[tuple[int, int]] = None) -> MaskSet:
        """Class-agnostic proposals for the image; (H, W) check when expect_dims given."""
        ...

    def prompt_segment(self, image_ref: str, box: BBox, point: Point,
                       expect_dims: Optional[tuple[int, int]] = None) -> MaskRLE:
        """One binary mask for a box + point prompt."""
        ...


# prompting calls this once per seed over the same pool, so decoded pool
# masks are worth caching (MaskRLE is frozen and hashable)
_decode_cached = lru_cache(maxsize=256)(rle_decode)


def resolve_prompt(pool: MaskSet, box: BBox, point: Point) -> MaskRLE:
    """Pick the pool mask a box + point prompt would select.

    Masks containing the point are scored by IoU against the box interior;
    ties go to the smaller mask, then the lower id. If no mask contains the
    point, the whole pool competes on box IoU alone. The result is a pure
    function of (pool, box, point): pool order never matters.
    """
    if not pool.masks:
        raise EmptyPool(f"no masks for image {pool.image_id!r}")
    box_mask = box_interior_mask(box, pool.height, pool.width)
    box_area = int(box_mask.sum())  # never 0 for a valid box

    def score(entry):
        m = _decode_cached(entry.rle)
        inter = int((m & box_mask).sum())
        iou = inter / (box_area + entry.rle.area - inter)
        return (-iou, entry.rle.area, entry.id)

    containing = [e for e in pool.masks if _decode_cached(e.rle)[point.y, point.x]]
    candidates = containing if containing else list(pool.masks)
    best = min(candidates, key=score)
    return best.rle


def _check_dims(ms_dims: tuple[int, int], expect_dims: Optional[tuple[int, int]], what: str):
    if expect_dims is not None and ms_dims != tuple(expect_dims):
        raise DimMismatch(f"{what}: masks are {ms_dims}, query image is {tuple(expect_dims)}")


class FileBackend:
    """Precomputed MaskSet JSON per image.

    Lookup for image P tries `<root>/<stem(P)>.masks.json` first, then the
    single-image fallback `<root>/masks.json`.
    """

    supports_auto = True
    supports_prompt = True  # emulated via resolve_prompt

    def __init__(self, root: str):
        self.root = Path(root)
        self._cache: dict[str, MaskSet] = {}
        self._lock = threading.Lock()

    def _mask_path(self, image_ref: str) -> Path:
        stem = Path(image_ref).stem
        for candidate in (self.root / f"{stem}.masks.json", self.root / "masks.json"):
            if candidate.is_file():
                return candidate
        raise ImageNotFound(f"no mask file for {image_ref!r} under {self.root}")

    def auto_masks(self, image_ref: str, expect_dims=None) -> MaskSet:
        with self._lock:
            ms = self._cache.get(image_ref)
        if ms is None:
            ms = sio.load_mask_set(self._mask_path(image_ref))
            with self._lock:
                self._cache[image_ref] = ms
        _check_dims((ms.height, ms.width), expect_dims, str(image_ref))
        return ms

    def prompt_segment(self, image_ref: str, box: BBox, point: Point, expect_dims=None) -> MaskRLE:
        pool = self.auto_masks(image_ref, expect_dims=expect_dims)
        rle = resolve_prompt(pool, box, point)
        if rle.area == 0:
            raise EmptyResult(f"prompt on {image_ref!r} resolved to an empty mask")
        return rle


class HttpBackend:
    """Client for a remote mask service.

    In-flight requests are bounded by a semaphore (default 4) and each
    request times out (default 30 s).
    """

    supports_auto = True
    supports_prompt = True

    def __init__(self, base_url: str, timeout: float = 30.0, max_in_flight: int = 4,
                 transport: str = "path"):
        if transport not in ("path", "b64"):
            raise ValueError("transport must be 'path' or 'b64'")
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.transport = transport
        self._sem = threading.BoundedSemaphore(max_in_flight)
        self._session = requests.Session()

    def _image_field(self, image_ref: str) -> dict:
        if self.transport == "path":
            return {"image_path": str(image_ref)}
        blob = Path(image_ref).read_bytes()
        return {"image_b64png": base64.b64encode(blob).decode("ascii")}

    def _post(self, endpoint: str, body: dict) -> dict:
        url = f"{self.base_url}{endpoint}"
        try:
            with self._sem:
                resp = self._session.post(url, json=body, timeout=self.timeout)
        except requests.RequestException as e:
            raise BackendUnavailable(f"{url}: {e}") from e
        if resp.status_code == 404:
            raise ImageNotFound(f"{url}: {resp.text}")
        if resp.status_code == 503:
            raise BackendUnavailable(f"{url}: model not loaded")
        if resp.status_code != 200:
            raise BackendError(f"{url}: HTTP {resp.status_code}: {resp.text}")
        return resp.json()

    def auto_masks(self, image_ref: str, expect_dims=None) -> MaskSet:
        obj = self._post("/v1/auto_masks", self._image_field(image_ref))
        ms = sio.mask_set_from_json(obj)
        _check_dims((ms.height, ms.width), expect_dims, str(image_ref))
        return ms

    def prompt_segment(self, image_ref: str, box: BBox, point: Point, expect_dims=None) -> MaskRLE:
        body = self._image_field(image_ref)
        body["box"] = [box.x0, box.y0, box.x1, box.y1]
        body["point"] = [point.x, point.y]
        obj = self._post("/v1/segment", body)
        rle = sio.rle_from_json(obj)
        _check_dims((rle.height, rle.width), expect_dims, str(image_ref))
        if rle.area == 0:
            raise EmptyResult(f"prompt on {image_ref!r} returned an empty mask")
        return rle


def open_backend(spec: str, **http_kwargs) -> SegmenterBackend:
    """Build a backend from a 'file:DIR' or 'http(s)://host:port' spec string."""
    if spec.startswith("file:"):
        return FileBackend(spec[len("file:"):])
    if spec.startswith(("http://", "https://")):
        return HttpBackend(spec, **http_kwargs)
    raise ValueError(f"unknown backend spec {spec!r}; use file:DIR or http://HOST:PORT")
