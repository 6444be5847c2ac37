"""FastAPI app implementing the mask wire protocol.

POST /v1/auto_masks   {"image_path": str} | {"image_b64png": str}
POST /v1/segment      {..., "box": [x0,y0,x1,y1], "point": [x,y]}

Errors: 400 malformed body, 404 image not found, 503 model not loaded.
Bodies are parsed by hand so the error codes match the protocol exactly
(framework validation would answer 422). Responses are canonical JSON
(sorted keys, compact separators) so conformance suites can compare bytes.
Model calls are serialized with a lock: one request at a time per instance.
"""
from __future__ import annotations

import base64
import binascii
import io as _io
import json
import logging
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from PIL import Image, UnidentifiedImageError

from .masks import box_mask, grid_masks, rle_encode

log = logging.getLogger(__name__)


class ProtocolError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _canonical(obj, status: int = 200) -> Response:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return Response(content=blob, status_code=status, media_type="application/json")


class MockModel:
    """Protocol-conformance stand-in: a fixed grid partition for automatic
    proposals and the box interior for prompt masks."""

    loaded = True

    def auto(self, image: np.ndarray) -> list[np.ndarray]:
        h, w = image.shape[:2]
        return grid_masks(h, w, tiles=4)

    def segment(self, image: np.ndarray, box: list[int], point: list[int]) -> np.ndarray:
        h, w = image.shape[:2]
        return box_mask(h, w, box)


class RealModel:
    """Wraps a promptable-segmentation backbone when its package and weights
    are available; otherwise reports itself not loaded (503)."""

    def __init__(self, weights: str, backbone: str = "vit_h"):
        self.loaded = False
        self._gen = None
        self._predictor = None
        try:
            from segment_anything import (  # type: ignore
                SamAutomaticMaskGenerator,
                SamPredictor,
                sam_model_registry,
            )

            sam = sam_model_registry[backbone](checkpoint=weights)
            # automatic generation runs with the generator's official defaults
            self._gen = SamAutomaticMaskGenerator(sam)
            self._predictor = SamPredictor(sam)
            self.loaded = True
        except Exception as e:  # missing package, missing weights, bad checkpoint
            log.warning("real model unavailable: %s", e)

    def auto(self, image: np.ndarray) -> list[np.ndarray]:
        records = self._gen.generate(image)
        return [np.asarray(r["segmentation"], dtype=bool) for r in records]

    def segment(self, image: np.ndarray, box: list[int], point: list[int]) -> np.ndarray:
        self._predictor.set_image(image)
        masks, scores, _ = self._predictor.predict(
            point_coords=np.asarray([point], dtype=np.float64),
            point_labels=np.asarray([1], dtype=np.int64),
            box=np.asarray(box, dtype=np.float64),
            multimask_output=False,
        )
        return np.asarray(masks[0], dtype=bool)


def _load_image(body: dict) -> tuple[np.ndarray, str]:
    has_path = "image_path" in body
    has_b64 = "image_b64png" in body
    if has_path == has_b64:  # neither or both
        raise ProtocolError(400, "body needs exactly one of image_path or image_b64png")
    if has_path:
        path = body["image_path"]
        if not isinstance(path, str):
            raise ProtocolError(400, "image_path must be a string")
        p = Path(path)
        if not p.is_file():
            raise ProtocolError(404, "image not found")
        try:
            img = Image.open(p)
            return np.asarray(img.convert("RGB"), dtype=np.uint8), p.stem
        except (UnidentifiedImageError, OSError):
            raise ProtocolError(400, "image_path is not a readable image")
    blob = body["image_b64png"]
    if not isinstance(blob, str):
        raise ProtocolError(400, "image_b64png must be a string")
    try:
        raw = base64.b64decode(blob, validate=True)
        img = Image.open(_io.BytesIO(raw))
        return np.asarray(img.convert("RGB"), dtype=np.uint8), "inline"
    except (binascii.Error, UnidentifiedImageError, OSError):
        raise ProtocolError(400, "image_b64png is not base64 PNG data")


def _int_list(body: dict, key: str, n: int) -> list[int]:
    v = body.get(key)
    if (not isinstance(v, (list, tuple)) or len(v) != n
            or not all(isinstance(t, int) and not isinstance(t, bool) for t in v)):
        raise ProtocolError(400, f"{key} must be a list of {n} integers")
    return [int(t) for t in v]


def create_app(model: str = "mock", weights: str | None = None,
               backbone: str = "vit_h") -> FastAPI:
    if model == "mock":
        backend = MockModel()
    elif model == "real":
        backend = RealModel(weights or "", backbone=backbone)
    else:
        raise ValueError("model must be 'mock' or 'real'")

    app = FastAPI(title="sam-adapter", docs_url=None, redoc_url=None)
    lock = threading.Lock()

    async def _parse(request: Request) -> dict:
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise ProtocolError(400, "body is not valid JSON")
        if not isinstance(body, dict):
            raise ProtocolError(400, "body must be a JSON object")
        return body

    @app.exception_handler(ProtocolError)
    async def _protocol_error(_request, exc: ProtocolError):
        return _canonical({"error": exc.message}, status=exc.status)

    @app.post("/v1/auto_masks")
    async def auto_masks(request: Request):
        body = await _parse(request)
        image, image_id = _load_image(body)
        if not backend.loaded:
            raise ProtocolError(503, "model not loaded")
        with lock:
            rasters = backend.auto(image)
        h, w = image.shape[:2]
        return _canonical({
            "image_id": image_id,
            "height": h,
            "width": w,
            "masks": [{"id": i, "rle": rle_encode(m), "source": "auto"}
                      for i, m in enumerate(rasters)],
        })

    @app.post("/v1/segment")
    async def segment(request: Request):
        body = await _parse(request)
        image, _ = _load_image(body)
        if not backend.loaded:
            raise ProtocolError(503, "model not loaded")
        h, w = image.shape[:2]
        x0, y0, x1, y1 = _int_list(body, "box", 4)
        px, py = _int_list(body, "point", 2)
        if not (0 <= x0 <= x1 < w and 0 <= y0 <= y1 < h):
            raise ProtocolError(400, "box out of bounds")
        if not (x0 <= px <= x1 and y0 <= py <= y1):
            raise ProtocolError(400, "point must lie inside the box")
        with lock:
            mask = backend.segment(image, [x0, y0, x1, y1], [px, py])
        return _canonical(rle_encode(mask))

    return app
