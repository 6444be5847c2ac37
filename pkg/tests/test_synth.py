import numpy as np
import pytest

from seco import io as sio
from seco.errors import ConfigError
from seco.rle import rle_decode
from seco.synth import SynthConfig, synth_case, write_case
from seco.types import VOID


def test_zero_corruption_pseudo_equals_gt():
    case = synth_case(SynthConfig(width=96, height=96, seed=3))
    assert np.array_equal(case.pseudo.data, case.gt.data)
    assert (case.gt.data != VOID).all()  # ground truth fully labeled


def test_speckle_keep_fraction():
    cfg = SynthConfig(width=256, height=256, speckle_keep_prob=0.2, seed=1)
    case = synth_case(cfg)
    gt_cov = float((case.gt.data != VOID).mean())
    ps_cov = float((case.pseudo.data != VOID).mean())
    assert ps_cov / gt_cov == pytest.approx(0.2, abs=0.02)


def test_same_seed_identical():
    cfg = SynthConfig(width=64, height=64, erosion_radius=1, speckle_keep_prob=0.4,
                      label_flip_rate=0.3, distractor_merge_rate=0.5, seed=11)
    a = synth_case(cfg)
    b = synth_case(cfg)
    assert np.array_equal(a.image, b.image)
    assert np.array_equal(a.gt.data, b.gt.data)
    assert np.array_equal(a.pseudo.data, b.pseudo.data)
    assert a.proposals == b.proposals
    assert a.truth == b.truth


def test_pseudo_support_inside_gt_support():
    cfg = SynthConfig(width=96, height=96, erosion_radius=2, speckle_keep_prob=0.3,
                      label_flip_rate=0.2, seed=5)
    case = synth_case(cfg)
    assert ((case.pseudo.data != VOID) <= (case.gt.data != VOID)).all()


def test_flip_bookkeeping_consistent():
    cfg = SynthConfig(width=96, height=96, speckle_keep_prob=0.5,
                      label_flip_rate=0.4, seed=7)
    case = synth_case(cfg)
    flips = case.truth["flipped"]
    assert flips, "expected some flipped components at rate 0.4"
    flip_px = rle_decode(sio.rle_from_json(case.truth["flip_pixels"]))
    for f in flips:
        m = rle_decode(sio.rle_from_json(f["rle"]))
        assert (case.pseudo.data[m] == f["to"]).all()
        assert (case.gt.data[m] == f["from"]).all()
        assert f["to"] != f["from"]
        assert flip_px[m].all()
    # unflipped labeled pixels match ground truth
    labeled = case.pseudo.data != VOID
    clean = labeled & ~flip_px
    assert (case.pseudo.data[clean] == case.gt.data[clean]).all()


def test_erosion_removes_boundaries():
    a = synth_case(SynthConfig(width=96, height=96, seed=2))
    b = synth_case(SynthConfig(width=96, height=96, erosion_radius=2, seed=2))
    assert (b.pseudo.data != VOID).sum() < (a.pseudo.data != VOID).sum()
    # identical class values where both are labeled
    both = (b.pseudo.data != VOID)
    assert (b.pseudo.data[both] == a.pseudo.data[both]).all()


def test_merged_pairs_recorded():
    cfg = SynthConfig(width=128, height=128, n_adjacent_pairs=3,
                      distractor_merge_rate=1.0, seed=9)
    case = synth_case(cfg)
    assert len(case.truth["merged_pairs"]) >= 3
    by_id = {m.id: m for m in case.proposals.masks}
    for pair in case.truth["merged_pairs"]:
        union = rle_decode(by_id[pair["union_id"]].rle)
        a = rle_decode(by_id[pair["component_ids"][0]].rle)
        b = rle_decode(by_id[pair["component_ids"][1]].rle)
        assert np.array_equal(union, a | b)
        assert pair["classes"][0] != pair["classes"][1]
        # the fine masks stay in the pool alongside the union distractor
        assert pair["component_ids"][0] in by_id and pair["component_ids"][1] in by_id


def test_proposals_cover_gt_components():
    case = synth_case(SynthConfig(width=96, height=96, seed=4))
    cover = np.zeros((96, 96), dtype=int)
    for m in case.proposals.masks:
        cover += rle_decode(m.rle)
    assert (cover >= 1).all()  # components partition the fully labeled gt


def test_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(speckle_keep_prob=1.5)
    with pytest.raises(ConfigError):
        SynthConfig(n_stuff=0)
    with pytest.raises(ConfigError):
        SynthConfig.from_json({"bogus_knob": 3})


def test_write_case(tmp_path):
    case = synth_case(SynthConfig(width=48, height=48, seed=6))
    write_case(case, tmp_path / "c0")
    for name in ("image.png", "gt.png", "pseudo.png", "masks.json", "truth.json",
                 "taxonomy.json"):
        assert (tmp_path / "c0" / name).is_file()
    back = sio.load_label_map(tmp_path / "c0" / "gt.png")
    assert np.array_equal(back.data, case.gt.data)
    assert sio.load_mask_set(tmp_path / "c0" / "masks.json") == case.proposals
