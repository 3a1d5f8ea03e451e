"""Overlap, boundary-distance and detection metrics against brute-force oracles."""

import numpy as np
import pytest

import oracles
from drrkit import (ValidationError, boundary_distance_metrics, boundary_pixels,
                    component_detection, dice_iou, evaluate_class_set,
                    evaluate_pair)


def _pair(rng, max_side=8, density=0.5):
    shape = (int(rng.integers(1, max_side + 1)), int(rng.integers(1, max_side + 1)))
    pred = (rng.random(size=shape) < density).astype(np.uint8)
    ref = (rng.random(size=shape) < density).astype(np.uint8)
    return pred, ref


# --- overlap -----------------------------------------------------------------

def test_overlap_identical():
    m = np.ones((4, 6), dtype=np.uint8)
    assert dice_iou(m, m) == (1.0, 1.0)


def test_overlap_disjoint():
    a = np.zeros((4, 4), dtype=np.uint8)
    b = np.zeros((4, 4), dtype=np.uint8)
    a[0, 0] = 1
    b[3, 3] = 1
    assert dice_iou(a, b) == (0.0, 0.0)


def test_overlap_half_shared():
    a = np.zeros((1, 4), dtype=np.uint8)
    b = np.zeros((1, 4), dtype=np.uint8)
    a[0, 0:2] = 1
    b[0, 1:3] = 1
    dice, iou = dice_iou(a, b)
    assert dice == pytest.approx(0.5)
    assert iou == pytest.approx(1.0 / 3.0)


def test_overlap_matches_oracle_and_identity():
    rng = np.random.default_rng(11)
    for _ in range(60):
        pred, ref = _pair(rng)
        if not pred.any() or not ref.any():
            continue
        dice, iou = dice_iou(pred, ref)
        rd, ri = oracles.overlap_reference(pred, ref)
        assert dice == pytest.approx(rd, abs=1e-12)
        assert iou == pytest.approx(ri, abs=1e-12)
        # dice = 2*iou / (1 + iou)
        assert dice == pytest.approx(2.0 * iou / (1.0 + iou), abs=1e-12)


def test_overlap_shape_mismatch_rejected():
    with pytest.raises(ValidationError):
        dice_iou(np.ones((2, 2), dtype=np.uint8), np.ones((2, 3), dtype=np.uint8))


# --- boundaries ---------------------------------------------------------------

def test_boundary_pixels_interior_excluded():
    m = np.zeros((5, 5), dtype=np.uint8)
    m[1:4, 1:4] = 1
    b = boundary_pixels(m)
    assert b[2, 2] == 0                 # interior
    assert b[1, 1] == 1 and b[1, 2] == 1


def test_boundary_pixels_image_edge_counts():
    m = np.ones((3, 3), dtype=np.uint8)
    b = boundary_pixels(m)
    assert b[1, 1] == 0
    assert b.sum() == 8


def test_boundary_metrics_identical():
    m = np.zeros((6, 6), dtype=np.uint8)
    m[2:5, 1:4] = 1
    hd95, asd, nsd = boundary_distance_metrics(m, m, nsd_tolerance_px=1.0)
    assert hd95 == 0.0 and asd == 0.0 and nsd == 1.0


def test_boundary_metrics_two_pixels_apart():
    a = np.zeros((1, 8), dtype=np.uint8)
    b = np.zeros((1, 8), dtype=np.uint8)
    a[0, 1] = 1
    b[0, 4] = 1
    hd95, asd, nsd = boundary_distance_metrics(a, b, nsd_tolerance_px=1.0)
    assert hd95 == pytest.approx(3.0)
    assert asd == pytest.approx(3.0)
    assert nsd == 0.0


def test_boundary_metrics_match_oracle():
    rng = np.random.default_rng(13)
    checked = 0
    while checked < 60:
        pred, ref = _pair(rng)
        if not pred.any() or not ref.any():
            continue
        tol = float(rng.uniform(0.5, 3.0))
        got = boundary_distance_metrics(pred, ref, nsd_tolerance_px=tol)
        want = oracles.boundary_metrics_reference(pred, ref, tol)
        assert got[0] == pytest.approx(want[0], abs=1e-9)
        assert got[1] == pytest.approx(want[1], abs=1e-9)
        assert got[2] == pytest.approx(want[2], abs=1e-9)
        checked += 1


def test_boundary_metrics_symmetry():
    rng = np.random.default_rng(17)
    for _ in range(20):
        pred, ref = _pair(rng)
        if not pred.any() or not ref.any():
            continue
        fwd = boundary_distance_metrics(pred, ref, nsd_tolerance_px=1.5)
        rev = boundary_distance_metrics(ref, pred, nsd_tolerance_px=1.5)
        assert fwd == pytest.approx(rev, abs=1e-12)


def test_boundary_metrics_translation_invariance():
    base_p = np.zeros((12, 12), dtype=np.uint8)
    base_r = np.zeros((12, 12), dtype=np.uint8)
    base_p[2:5, 2:6] = 1
    base_r[3:6, 3:5] = 1
    shift_p = np.roll(base_p, (3, 2), axis=(0, 1))
    shift_r = np.roll(base_r, (3, 2), axis=(0, 1))
    a = boundary_distance_metrics(base_p, base_r, nsd_tolerance_px=1.0)
    b = boundary_distance_metrics(shift_p, shift_r, nsd_tolerance_px=1.0)
    assert a == pytest.approx(b, abs=1e-12)


# --- detection ------------------------------------------------------------------

def test_detection_two_pred_one_ref():
    pred = np.zeros((10, 20), dtype=np.uint8)
    ref = np.zeros((10, 20), dtype=np.uint8)
    ref[2:6, 2:6] = 1                    # 16 px
    pred[2:6, 2:6] = 1                   # matches the reference exactly
    pred[2:4, 14:16] = 1                 # spurious island
    precision, recall, f1, n_pred, n_ref, n_match = component_detection(pred, ref)
    assert (n_pred, n_ref, n_match) == (2, 1, 1)
    assert precision == pytest.approx(0.5)
    assert recall == pytest.approx(1.0)
    assert f1 == pytest.approx(2.0 / 3.0)


def test_detection_low_iou_not_matched():
    pred = np.zeros((8, 8), dtype=np.uint8)
    ref = np.zeros((8, 8), dtype=np.uint8)
    pred[0:2, 0:4] = 1                   # 8 px
    ref[1:2, 3:6] = 1                    # 3 px, overlap 1 px, IoU 1/10 < 0.5
    _, _, _, n_pred, n_ref, n_match = component_detection(pred, ref)
    assert (n_pred, n_ref, n_match) == (1, 1, 0)


def test_detection_matches_oracle():
    rng = np.random.default_rng(19)
    for _ in range(60):
        pred, ref = _pair(rng, density=0.4)
        got = component_detection(pred, ref)
        want = oracles.detection_reference(pred, ref, 0.5)
        assert got == pytest.approx(want, abs=1e-12)


def _candidate_ious(pred, ref):
    out = []
    for cp in oracles.flood_components(pred):
        for cr in oracles.flood_components(ref):
            inter = len(cp & cr)
            if inter:
                out.append(inter / len(cp | cr))
    return out


def test_detection_greedy_equals_max_matching_distinct_ious():
    rng = np.random.default_rng(23)
    checked = 0
    while checked < 40:
        pred, ref = _pair(rng, density=0.45)
        ious = _candidate_ious(pred, ref)
        if len(set(ious)) != len(ious):
            continue
        _, _, _, _, _, n_match = component_detection(pred, ref)
        assert n_match == oracles.max_matching_reference(pred, ref, 0.5)
        checked += 1


# --- whole-pair evaluation ---------------------------------------------------------

def test_evaluate_pair_identical_perfect():
    m = np.zeros((8, 8), dtype=np.uint8)
    m[2:6, 3:7] = 1
    rep = evaluate_pair(m, m)
    assert rep.dice == 1.0 and rep.iou == 1.0
    assert rep.hd95 == 0.0 and rep.asd == 0.0 and rep.nsd == 1.0
    assert rep.precision == 1.0 and rep.recall == 1.0 and rep.f1 == 1.0
    assert rep.flags == ()


def test_evaluate_pair_both_empty_convention():
    z = np.zeros((5, 7), dtype=np.uint8)
    rep = evaluate_pair(z, z)
    assert rep.dice == 1.0 and rep.iou == 1.0 and rep.nsd == 1.0
    assert rep.hd95 == 0.0 and rep.asd == 0.0
    assert (rep.precision, rep.recall, rep.f1) == (1.0, 1.0, 1.0)
    assert "both_empty" in rep.flags


def test_evaluate_pair_one_empty_convention():
    z = np.zeros((3, 4), dtype=np.uint8)
    m = z.copy()
    m[1, 1] = 1
    rep = evaluate_pair(m, z)
    assert rep.dice == 0.0 and rep.iou == 0.0 and rep.nsd == 0.0
    diag = float(np.hypot(3, 4))
    assert rep.hd95 == pytest.approx(diag)
    assert rep.asd == pytest.approx(diag)
    assert (rep.precision, rep.recall, rep.f1) == (0.0, 0.0, 0.0)
    assert "pred_empty" in rep.flags or "ref_empty" in rep.flags


def test_evaluate_pair_json_round_trip_keys():
    m = np.zeros((6, 6), dtype=np.uint8)
    m[1:4, 1:4] = 1
    d = evaluate_pair(m, m).to_json_dict()
    for key in ("dice", "iou", "hd95", "asd", "nsd",
                "precision", "recall", "f1", "flags"):
        assert key in d


# --- class-set evaluation -----------------------------------------------------------

def test_evaluate_class_set_single_class_zero_width_ci():
    m = np.zeros((8, 8), dtype=np.uint8)
    m[2:5, 2:5] = 1
    rep = evaluate_class_set([(1, m, m)], n_resamples=200, seed=4)
    agg = rep.aggregate["dice"]
    assert agg.mean == 1.0
    assert agg.lower == 1.0 and agg.upper == 1.0


def test_evaluate_class_set_mean_of_two():
    # class 1: dice 0.4 (|P|=1, |R|=4, overlap 1)
    p1 = np.zeros((6, 6), dtype=np.uint8)
    r1 = np.zeros((6, 6), dtype=np.uint8)
    p1[0, 0] = 1
    r1[0, 0:4] = 1
    assert dice_iou(p1, r1)[0] == pytest.approx(0.4)
    # class 2: dice 0.6 (|P|=4, |R|=6, overlap 3)
    p2 = np.zeros((6, 6), dtype=np.uint8)
    r2 = np.zeros((6, 6), dtype=np.uint8)
    p2[1, 0:4] = 1
    r2[1, 1:4] = 1
    r2[2, 0:3] = 1
    assert dice_iou(p2, r2)[0] == pytest.approx(0.6)
    rep = evaluate_class_set([(1, p1, r1), (2, p2, r2)], n_resamples=500, seed=7)
    assert rep.aggregate["dice"].mean == pytest.approx(0.5)
    assert set(rep.per_class) == {1, 2}


def test_evaluate_class_set_seeded_reproducible():
    rng = np.random.default_rng(29)
    pairs = []
    for cid in range(3):
        pred, ref = _pair(rng, max_side=8, density=0.5)
        pred[0, 0] = 1
        ref[0, 0] = 1
        pairs.append((cid, pred, ref))
    a = evaluate_class_set(pairs, n_resamples=300, seed=42)
    b = evaluate_class_set(pairs, n_resamples=300, seed=42)
    assert a.aggregate == b.aggregate
    c = evaluate_class_set(pairs, n_resamples=300, seed=43)
    assert c.aggregate["dice"].mean == a.aggregate["dice"].mean


def test_evaluate_class_set_duplicate_id_rejected():
    m = np.ones((3, 3), dtype=np.uint8)
    with pytest.raises(ValidationError):
        evaluate_class_set([(1, m, m), (1, m, m)])


def test_evaluate_class_set_error_names_class():
    m = np.ones((3, 3), dtype=np.uint8)
    bad = np.ones((3, 4), dtype=np.uint8)
    with pytest.raises(ValidationError, match="class 7"):
        evaluate_class_set([(7, m, bad)])
