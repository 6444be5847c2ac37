import struct

import numpy as np
import pytest
from PIL import Image

from seco import io as sio
from seco.errors import (
    BadMagic,
    ClassOutOfRange,
    FormatError,
    NonFiniteValue,
    TruncatedFile,
)
from seco.types import ClassDef, FeatureMap, LabelMap, MaskEntry, MaskSet, Taxonomy, STUFF
from seco.rle import rle_encode


def test_label_map_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    data = rng.integers(0, 5, (17, 23)).astype(np.uint8)
    data[0, 0] = 255
    path = tmp_path / "m.png"
    sio.save_label_map(LabelMap(data), path)
    back = sio.load_label_map(path)
    assert np.array_equal(back.data, data)


def test_label_map_rejects_rgb(tmp_path):
    path = tmp_path / "rgb.png"
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(path)
    with pytest.raises(FormatError):
        sio.load_label_map(path)


def test_label_map_rejects_non_png(tmp_path):
    path = tmp_path / "x.png"
    path.write_bytes(b"not a png")
    with pytest.raises(FormatError):
        sio.load_label_map(path)


def test_class_out_of_range(tmp_path):
    tax = Taxonomy(tuple(ClassDef(f"c{i}", STUFF) for i in range(19)))
    data = np.full((4, 4), 254, dtype=np.uint8)
    path = tmp_path / "m.png"
    sio.save_label_map(LabelMap(data), path)
    with pytest.raises(ClassOutOfRange):
        sio.load_label_map(path, tax)
    # 255 stays legal as void
    sio.save_label_map(LabelMap(np.full((4, 4), 255, dtype=np.uint8)), path)
    sio.load_label_map(path, tax)


def test_taxonomy_round_trip(tmp_path, tax_small):
    path = tmp_path / "tax.json"
    sio.save_taxonomy(tax_small, path)
    back = sio.load_taxonomy(path)
    assert back == tax_small
    assert back.stuff_ids == (0, 1)
    assert back.things_ids == (2, 3)


def test_mask_set_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    masks = tuple(
        MaskEntry(id=i, rle=rle_encode(rng.random((6, 7)) < 0.4), source="auto")
        for i in range(3)
    )
    ms = MaskSet(image_id="img0", height=6, width=7, masks=masks)
    path = tmp_path / "m.masks.json"
    sio.save_mask_set(ms, path)
    assert sio.load_mask_set(path) == ms


def test_mask_set_dim_invariant():
    good = rle_encode(np.ones((2, 2)))
    with pytest.raises(FormatError):
        MaskSet(image_id="x", height=3, width=3, masks=(MaskEntry(0, good, "auto"),))


def test_feature_map_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    fm = FeatureMap(rng.random((2, 2, 1)).astype(np.float32))
    path = tmp_path / "f.bin"
    sio.save_feature_map(fm, path)
    back = sio.load_feature_map(path)
    assert back.data.shape == (2, 2, 1)
    assert np.array_equal(back.data, fm.data)


def test_feature_map_bad_magic(tmp_path):
    path = tmp_path / "f.bin"
    path.write_bytes(b"WRONGMG\x00" + struct.pack("<III", 1, 1, 1) + b"\x00" * 4)
    with pytest.raises(BadMagic):
        sio.load_feature_map(path)


def test_feature_map_truncated(tmp_path):
    path = tmp_path / "f.bin"
    blob = sio.FEATURE_MAGIC + struct.pack("<III", 2, 2, 1) + b"\x00" * 8  # needs 16
    path.write_bytes(blob)
    with pytest.raises(TruncatedFile):
        sio.load_feature_map(path)


def test_feature_map_nan_rejected(tmp_path):
    path = tmp_path / "f.bin"
    payload = np.array([1.0, float("nan"), 0.0, 2.0], dtype="<f4").tobytes()
    path.write_bytes(sio.FEATURE_MAGIC + struct.pack("<III", 2, 2, 1) + payload)
    with pytest.raises(NonFiniteValue):
        sio.load_feature_map(path)


def test_codecs_deterministic(tmp_path):
    rng = np.random.default_rng(9)
    data = rng.integers(0, 3, (9, 9)).astype(np.uint8)
    p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
    sio.save_label_map(LabelMap(data), p1)
    sio.save_label_map(LabelMap(data), p2)
    assert p1.read_bytes() == p2.read_bytes()
