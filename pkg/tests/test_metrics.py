import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cm_from_best, tiny_dataset
from oracles import mann_whitney_auc, pr_auc_bruteforce, topn_recall, tp_gaps
from vpreval.dataset import GroundTruth, widen_ground_truth
from vpreval.engine import ConfusionMatrix
from vpreval.errors import MetricError, ValidationError
from vpreval.metrics import (
    SpeedModel,
    curve_from_csv,
    pr_curve_auc,
    recall_rate_at_n,
    recall_rate_curve,
    retrieval_speed_model,
    roc_curve_auc,
    tp_distribution,
)

# -- PR --------------------------------------------------------------------------


def test_pr_all_correct_single_point():
    cm, gt = cm_from_best([0.8] * 5, [True] * 5)
    pr = pr_curve_auc(cm, gt)
    assert pr.points[-1] == (1.0, 1.0)
    assert len(pr.points) == 2  # recall-0 anchor + the single swept point
    assert pr.auc == 1.0


def test_pr_living_room_anchor():
    scores = [0.9 - 0.01 * i for i in range(17)] + [0.5 - 0.01 * i for i in range(15)]
    cm, gt = cm_from_best(scores, [True] * 17 + [False] * 15)
    assert pr_curve_auc(cm, gt).auc == 1.0
    assert recall_rate_at_n(cm, gt, 1) == pytest.approx(17 / 32, abs=1e-12)


def test_pr_four_query_example():
    cm, gt = cm_from_best([0.9, 0.8, 0.7, 0.6], [True, False, True, True])
    pr = pr_curve_auc(cm, gt)
    oracle_auc, oracle_points = pr_auc_bruteforce(cm.scores.tolist(), list(gt))
    assert pr.auc == pytest.approx(oracle_auc, abs=1e-12)
    assert pr.auc == pytest.approx(55 / 72, abs=1e-12)  # 1/3 + 7/36 + 17/72 by hand
    assert list(pr.points) == oracle_points


def test_pr_excludes_true_negative_queries():
    scores = np.array([[0.9, 0.1], [0.95, 0.2], [0.3, 0.6]])
    gt = GroundTruth([[0], [], [1]])
    pr = pr_curve_auc(ConfusionMatrix(scores), gt)
    assert pr.auc == 1.0


def test_pr_without_positives():
    cm = ConfusionMatrix(np.array([[0.3, 0.2]]))
    with pytest.raises(MetricError, match="PR undefined without positives"):
        pr_curve_auc(cm, GroundTruth([[]]))


def test_pr_all_wrong():
    cm, gt = cm_from_best([0.9, 0.5], [False, False])
    assert pr_curve_auc(cm, gt).auc == 0.0


def test_pr_ground_truth_length_checked():
    with pytest.raises(ValidationError):
        pr_curve_auc(ConfusionMatrix(np.eye(2)), GroundTruth([[0]]))


def test_pr_csv_round_trip():
    cm, gt = cm_from_best([0.9, 0.8, 0.7, 0.6, 0.6], [True, False, True, True, False])
    pr = pr_curve_auc(cm, gt)
    back = curve_from_csv("PR", pr.to_csv())
    assert back.points == pr.points and back.auc == pr.auc and back.thresholds == pr.thresholds


def _random_instance(rng, need_negative=False):
    tq = int(rng.integers(2, 65))
    z = int(rng.integers(1, 65))
    scores = np.round(rng.random((tq, z)), int(rng.integers(1, 4)))
    gt = []
    for _ in range(tq):
        if rng.random() < 0.3:
            gt.append([])
        else:
            gt.append(list(rng.integers(0, z, size=int(rng.integers(1, 4)))))
    gt[0] = [int(rng.integers(0, z))]
    if need_negative:
        gt[-1] = []
    return scores, GroundTruth(gt)


def test_pr_matches_bruteforce_random():
    rng = np.random.default_rng(42)
    for _ in range(200):
        scores, gt = _random_instance(rng)
        auc, _ = pr_auc_bruteforce(scores.tolist(), list(gt))
        assert abs(pr_curve_auc(ConfusionMatrix(scores), gt).auc - auc) <= 1e-9


def test_widening_can_lower_aucpr():
    # correct best matches at 0.9 and 0.7 outrank the wrong ones at 0.4 and 0.1 (AUC 1).
    # Widening relabels the 0.1 query as correct; it now sits below a wrong match.
    scores = np.array([[0.9, 0.0, 0.0, 0.0], [0.0, 0.7, 0.0, 0.0], [0.0, 0.0, 0.0, 0.4], [0.0, 0.0, 0.0, 0.1]])
    d = tiny_dataset([[0], [1], [0], [2]], 4)
    cm = ConfusionMatrix(scores)
    before = pr_curve_auc(cm, d.ground_truth).auc
    after = pr_curve_auc(cm, widen_ground_truth(d, 1).ground_truth).auc
    assert before == 1.0
    assert after < before
    assert recall_rate_at_n(cm, widen_ground_truth(d, 1).ground_truth, 1) > recall_rate_at_n(cm, d.ground_truth, 1)


# -- RecallRate@N ----------------------------------------------------------------


def test_rr_full_retrieval():
    rng = np.random.default_rng(1)
    cm = ConfusionMatrix(rng.random((10, 6)))
    gt = GroundTruth([[int(rng.integers(0, 6))] for _ in range(10)])
    assert recall_rate_at_n(cm, gt, 6) == 1.0


def test_rr_hand_enumeration():
    scores = np.array([[0.9, 0.8, 0.1], [0.5, 0.5, 0.5], [0.2, 0.3, 0.4]])
    gt = GroundTruth([[1], [2], [0]])
    cm = ConfusionMatrix(scores)
    # top-2 sets: {0,1} hit, {0,1} miss (ties -> lower indices), {2,1} miss
    assert recall_rate_at_n(cm, gt, 2) == pytest.approx(1 / 3)
    assert recall_rate_at_n(cm, gt, 1) == 0.0
    assert recall_rate_at_n(cm, gt, 3) == 1.0


def test_rr_n_bounds():
    cm = ConfusionMatrix(np.eye(3))
    with pytest.raises(MetricError):
        recall_rate_at_n(cm, GroundTruth.identity(3), 4)
    with pytest.raises(MetricError):
        recall_rate_at_n(cm, GroundTruth.identity(3), 0)


def test_rr_curve_truncates_at_z():
    cm = ConfusionMatrix(np.eye(3))
    curve = recall_rate_curve(cm, GroundTruth.identity(3), 20)
    assert [p[0] for p in curve.points] == [1.0, 2.0, 3.0]


def test_rr_matches_selection_oracle():
    rng = np.random.default_rng(7)
    for _ in range(100):
        scores, gt = _random_instance(rng)
        cm = ConfusionMatrix(scores)
        for n in {1, 2, scores.shape[1]}:
            if n <= scores.shape[1]:
                assert recall_rate_at_n(cm, gt, n) == topn_recall(scores.tolist(), list(gt), n)


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_rr_equals_final_precision(seed):
    scores, gt = _random_instance(np.random.default_rng(seed))
    cm = ConfusionMatrix(scores)
    assert recall_rate_at_n(cm, gt, 1) == pr_curve_auc(cm, gt).points[-1][1]


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_rr_nondecreasing_in_n(seed):
    scores, gt = _random_instance(np.random.default_rng(seed))
    ys = recall_rate_curve(ConfusionMatrix(scores), gt, 64).ys
    assert all(a <= b for a, b in zip(ys, ys[1:]))


@settings(max_examples=150, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_monotone_transform_keeps_classifications(seed):
    rng = np.random.default_rng(seed)
    scores, gt = _random_instance(rng)
    a = ConfusionMatrix(scores)
    b = ConfusionMatrix(np.sqrt(scores))  # strictly increasing on [0, 1]
    np.testing.assert_array_equal(a.best_index, b.best_index)
    np.testing.assert_array_equal(a.correct(gt), b.correct(gt))
    for n in range(1, scores.shape[1] + 1):
        assert recall_rate_at_n(a, gt, n) == recall_rate_at_n(b, gt, n)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.integers(0, 5))
def test_widening_never_lowers_rr(seed, r):
    scores, gt = _random_instance(np.random.default_rng(seed))
    d = tiny_dataset(gt, scores.shape[1])
    cm = ConfusionMatrix(scores)
    wide = widen_ground_truth(d, r).ground_truth
    for n in range(1, min(4, scores.shape[1]) + 1):
        assert recall_rate_at_n(cm, wide, n) >= recall_rate_at_n(cm, gt, n)


# -- ROC -------------------------------------------------------------------------


def test_roc_ideal():
    scores = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0], [0.0, 0.0]])
    gt = GroundTruth([[0], [1], [], []])
    roc = roc_curve_auc(ConfusionMatrix(scores), gt)
    assert roc.auc == 1.0
    assert roc.points[0] == (0.0, 0.0) and roc.points[-1] == (1.0, 1.0)


def test_roc_no_separation():
    rng = np.random.default_rng(3)
    n = 4000
    s = rng.random(n)
    scores = np.stack([s, np.zeros(n)], axis=1)
    gt = GroundTruth([[0] if i % 2 else [] for i in range(n)])
    assert roc_curve_auc(ConfusionMatrix(scores), gt).auc == pytest.approx(0.5, abs=0.03)


def test_roc_hand_set_mann_whitney():
    pos = [0.9, 0.7, 0.6, 0.3]
    neg = [0.8, 0.6, 0.2, 0.1]
    scores = np.array([[s, 0.0] for s in pos + neg])
    gt = GroundTruth([[0]] * 4 + [[]] * 4)
    # pairs won: 0.9 beats 4; 0.7 beats 3; 0.6 beats 2 and ties 1; 0.3 beats 2 -> 11.5 / 16
    assert mann_whitney_auc(scores.tolist(), list(gt)) == 11.5 / 16
    assert roc_curve_auc(ConfusionMatrix(scores), gt).auc == pytest.approx(11.5 / 16, abs=1e-12)


def test_roc_wrong_positive_is_false_negative():
    scores = np.array([[0.2, 0.9], [0.8, 0.1], [0.5, 0.0]])
    gt = GroundTruth([[0], [0], []])  # query 0 retrieves the wrong reference
    roc = roc_curve_auc(ConfusionMatrix(scores), gt)
    assert max(p[1] for p in roc.points) == 0.5
    assert roc.auc == pytest.approx(mann_whitney_auc(scores.tolist(), list(gt)), abs=1e-12)


def test_roc_requires_negatives():
    with pytest.raises(MetricError, match="ROC requires true-negative queries"):
        roc_curve_auc(ConfusionMatrix(np.eye(2)), GroundTruth.identity(2))


def test_roc_matches_mann_whitney_random():
    rng = np.random.default_rng(11)
    for _ in range(200):
        scores, gt = _random_instance(rng, need_negative=True)
        auc = roc_curve_auc(ConfusionMatrix(scores), gt).auc
        assert abs(auc - mann_whitney_auc(scores.tolist(), list(gt))) <= 1e-9


# -- TP distribution -------------------------------------------------------------


def test_tpdist_all_true_positives():
    d = tiny_dataset(GroundTruth.identity(6), 6)
    tpd = tp_distribution(ConfusionMatrix(np.eye(6)), d)
    nonzero = [(x, y) for x, y in tpd.points if y]
    assert nonzero == [(1.0, 5.0)]


def test_tpdist_gaps():
    d = tiny_dataset(GroundTruth.identity(5), 5)
    scores = np.eye(5)
    scores[1] = [0, 0, 1, 0, 0]
    scores[2] = [0, 0, 0, 1, 0]
    tpd = tp_distribution(ConfusionMatrix(scores), d)  # TPs at 0, 3, 4
    assert dict(tpd.points) == {0.0: 0.0, 1.0: 1.0, 2.0: 0.0, 3.0: 1.0}
    assert tpd.info["max_gap_m"] == 3.0


def test_tpdist_matches_gap_enumeration():
    rng = np.random.default_rng(5)
    mask = rng.random(50) < 0.4
    spacing = 2.5
    scores = np.zeros((50, 50))
    for q in range(50):
        scores[q, q if mask[q] else (q + 1) % 50] = 1.0
    d = tiny_dataset(GroundTruth.identity(50), 50)
    d = type(d)(d.name, d.queries, d.references, d.ground_truth, frame_spacing_m=spacing)
    tpd = tp_distribution(ConfusionMatrix(scores), d)
    gaps = tp_gaps(mask.tolist(), spacing)
    expected = {}
    for g in gaps:
        expected[g] = expected.get(g, 0) + 1
    got = {x: y for x, y in tpd.points if y}
    assert got == {k: float(v) for k, v in expected.items()}
    assert sum(y for _, y in tpd.points) == len(gaps)


def test_tpdist_too_few():
    d = tiny_dataset(GroundTruth.identity(3), 3)
    scores = np.array([[1.0, 0, 0], [1.0, 0, 0], [1.0, 0, 0]])
    tpd = tp_distribution(ConfusionMatrix(scores), d)
    assert tpd.points == () and "warning" in tpd.info


def test_tpdist_needs_trajectory():
    d = tiny_dataset(GroundTruth.identity(2), 2, is_trajectory=False)
    with pytest.raises(MetricError):
        tp_distribution(ConfusionMatrix(np.eye(2)), d)


# -- speed model -----------------------------------------------------------------


def test_speed_model_arithmetic():
    out = retrieval_speed_model(SpeedModel(k=0.5, v=1.0, z=1000, t_e=1.0, t_m=0.001))
    assert out["t_r"] == 2.0 and out["fps_vpr"] == 0.5 and out["v_max"] == 1.0
    assert out["fps_req"] == 0.5 and out["feasible"] is True


def test_speed_model_singleton_map():
    out = retrieval_speed_model(SpeedModel(k=1.0, v=1.0, z=1, t_e=0.3, t_m=0.02))
    assert out["t_r"] == 0.3 + 0.02


def test_speed_model_feasibility_flips_at_vmax():
    base = dict(k=0.5, z=1000, t_e=1.0, t_m=0.001)
    v_max = retrieval_speed_model(SpeedModel(v=1.0, **base))["v_max"]
    for v in np.linspace(0.01, 3.0, 300):
        if math.isclose(v, v_max, rel_tol=1e-12):
            continue
        assert retrieval_speed_model(SpeedModel(v=float(v), **base))["feasible"] == (v < v_max)


@pytest.mark.parametrize("field", ["k", "v", "z", "t_e", "t_m"])
def test_speed_model_rejects_nonpositive(field):
    params = dict(k=0.5, v=1.0, z=10, t_e=0.1, t_m=0.01)
    params[field] = 0
    with pytest.raises(ValidationError):
        SpeedModel(**params)
