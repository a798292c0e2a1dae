import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arepas.metrics import (
    EvalResult,
    auprc,
    confusion_counts,
    dice,
    evaluate_maps,
    pooled_dice,
    pr_curve,
    precision,
    recall,
    select_threshold,
    threshold_grid,
)

from oracles import (
    auprc_reference,
    confusion_reference,
    dice_reference,
    pooled_dice_at_threshold,
    precision_reference,
    recall_reference,
)


class TestConfusionCounts:
    def test_all_ones(self):
        m = np.ones((4, 4))
        assert confusion_counts(m, m) == (16, 0, 0, 0)

    def test_pred_empty_gt_full(self):
        assert confusion_counts(np.zeros((4, 4)), np.ones((4, 4))) == (0, 0, 16, 0)

    def test_matches_loop_oracle(self, rng):
        for _ in range(20):
            pred = rng.integers(0, 2, (16, 16))
            gt = rng.integers(0, 2, (16, 16))
            assert confusion_counts(pred, gt) == confusion_reference(pred, gt)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            confusion_counts(np.zeros((2, 2)), np.zeros((3, 3)))


class TestPixelMetrics:
    def test_identical_nonempty_dice_one(self, rng):
        m = (rng.uniform(size=(8, 8)) > 0.5).astype(int)
        m[0, 0] = 1
        assert dice(m, m) == 1.0

    def test_disjoint_dice_zero(self):
        a = np.zeros((4, 4)); a[0] = 1
        b = np.zeros((4, 4)); b[2] = 1
        assert dice(a, b) == 0.0

    def test_half_cover_closed_form(self):
        gt = np.zeros((10, 10)); gt.ravel()[:100] = 1  # 100 px
        pred = np.zeros((10, 10)); pred.ravel()[:50] = 1  # the 50-px subset
        assert abs(dice(pred, gt) - 2 * 50 / 150) < 1e-12

    def test_empty_empty_dice_is_one(self):
        z = np.zeros((4, 4))
        assert dice(z, z) == 1.0
        assert precision(z, z) == 1.0
        assert recall(z, z) == 1.0

    def test_match_oracles_on_random_pairs(self, rng):
        for _ in range(50):
            side = int(rng.integers(4, 24))
            pred = rng.integers(0, 2, (side, side))
            gt = rng.integers(0, 2, (side, side))
            assert dice(pred, gt) == dice_reference(pred, gt)
            assert precision(pred, gt) == precision_reference(pred, gt)
            assert recall(pred, gt) == recall_reference(pred, gt)


class TestAuprc:
    def test_perfect_separation(self, rng):
        gt = rng.integers(0, 2, 200)
        gt[0] = 1
        scores = np.where(gt, rng.uniform(0.6, 1.0, 200), rng.uniform(0.0, 0.4, 200))
        assert abs(auprc(scores, gt) - 1.0) < 1e-12

    def test_constant_scores_give_prevalence(self, rng):
        gt = (rng.uniform(size=1000) < 0.3).astype(int)
        gt[0] = 1
        scores = np.full(1000, 0.5)
        assert abs(auprc(scores, gt) - gt.mean()) < 1e-12

    def test_matches_exhaustive_oracle_quantized(self, rng):
        for _ in range(10):
            n = int(rng.integers(50, 1000))
            gt = rng.integers(0, 2, n)
            gt[0] = 1
            scores = np.round(rng.uniform(0, 1, n), 2)
            assert abs(auprc(scores, gt) - auprc_reference(scores, gt)) < 1e-9

    def test_matches_exhaustive_oracle_continuous(self, rng):
        for _ in range(3):
            n = 500
            gt = rng.integers(0, 2, n)
            gt[0] = 1
            scores = rng.uniform(0, 1, n)
            assert abs(auprc(scores, gt) - auprc_reference(scores, gt)) < 1e-9

    def test_all_negative_gt_rejected(self):
        with pytest.raises(ValueError, match="no positive"):
            auprc(np.ones(10), np.zeros(10))

    def test_pooling_lists(self, rng):
        maps = [rng.uniform(0, 1, (8, 8)) for _ in range(3)]
        gts = [rng.integers(0, 2, (8, 8)) for _ in range(3)]
        gts[0][0, 0] = 1
        flat = auprc(np.concatenate([m.ravel() for m in maps]), np.concatenate([g.ravel() for g in gts]))
        assert auprc(maps, gts) == flat


class TestPrCurve:
    def test_endpoint_recall_one_precision_prevalence(self, rng):
        gt = rng.integers(0, 2, 500)
        gt[0] = 1
        scores = rng.uniform(0, 1, 500)
        prec, rec, thresholds = pr_curve(scores, gt)
        assert rec[-1] == 1.0
        assert abs(prec[-1] - gt.mean()) < 1e-12
        assert thresholds[-1] == scores.min()

    def test_recall_nondecreasing(self, rng):
        gt = rng.integers(0, 2, 300)
        gt[0] = 1
        _, rec, _ = pr_curve(rng.uniform(0, 1, 300), gt)
        assert np.all(np.diff(rec) >= 0)


class TestSelectThreshold:
    def test_scores_equal_gt_selects_zero(self):
        gt = np.zeros((8, 8))
        gt[2:5, 2:5] = 1
        assert select_threshold([gt.astype(float)], [gt]) == 0.0

    def test_all_zero_scores_give_zero(self):
        assert select_threshold([np.zeros((4, 4))], [np.zeros((4, 4))]) == 0.0

    def test_within_one_grid_step_of_dense_sweep(self, rng):
        gt = (rng.uniform(size=(32, 32)) < 0.2).astype(float)
        scores = gt * 0.9 + rng.uniform(0, 1, (32, 32)) * 0.1
        got = select_threshold([scores], [gt])

        dense = np.linspace(0, scores.max(), 10001)
        dices = [pooled_dice_at_threshold(scores, gt, t) for t in dense]
        best = dense[int(np.argmax(dices))]
        step = scores.max() / 255
        assert abs(got - best) <= step

    def test_fixed_point_reproduces_dice(self, rng):
        scores = rng.uniform(0, 1, (16, 16))
        gt = (rng.uniform(size=(16, 16)) < 0.3).astype(int)
        t = select_threshold([scores], [gt])
        grid = threshold_grid(float(scores.max()))
        all_dice = [pooled_dice([scores], [gt], g) for g in grid]
        assert pooled_dice([scores], [gt], t) == max(all_dice)

    def test_tie_takes_lowest(self):
        # two separated clusters: every threshold between them gives dice 1
        scores = np.array([[0.0, 0.0], [0.9, 0.9]])
        gt = np.array([[0, 0], [1, 1]])
        t = select_threshold([scores], [gt])
        grid = threshold_grid(0.9)
        winners = [g for g in grid if pooled_dice([scores], [gt], g) == 1.0]
        assert t == winners[0]


class TestEvaluateMaps:
    def test_pooled_identity_dice_precision_recall(self, rng):
        maps = [rng.uniform(0, 1, (16, 16)) for _ in range(4)]
        gts = [(rng.uniform(size=(16, 16)) < 0.25).astype(int) for _ in range(4)]
        gts[0][0, 0] = 1
        res = evaluate_maps(maps, gts, threshold=0.5)
        if res.precision + res.recall > 0:
            harmonic = 2 * res.precision * res.recall / (res.precision + res.recall)
            assert abs(res.dice - harmonic) < 1e-12

    def test_per_image_dice_and_stderr(self, rng):
        maps = [rng.uniform(0, 1, (8, 8)) for _ in range(5)]
        gts = [(rng.uniform(size=(8, 8)) < 0.3).astype(int) for _ in range(5)]
        gts[0][0, 0] = 1
        res = evaluate_maps(maps, gts, threshold=0.4)
        assert len(res.per_image_dice) == 5
        expected = float(np.std(res.per_image_dice, ddof=1) / np.sqrt(5))
        assert res.dice_stderr == expected

    def test_all_metrics_in_unit_interval(self, rng):
        maps = [rng.uniform(0, 1, (8, 8))]
        gts = [(rng.uniform(size=(8, 8)) < 0.5).astype(int)]
        gts[0][0, 0] = 1
        res = evaluate_maps(maps, gts, threshold=0.3)
        res.validate()
        for v in (res.dice, res.precision, res.recall, res.auprc):
            assert 0.0 <= v <= 1.0

    def test_perfect_prediction_dice_one(self):
        gt = np.zeros((8, 8)); gt[3:6, 3:6] = 1
        res = evaluate_maps([gt.astype(float)], [gt], threshold=0.5)
        assert res.dice == 1.0 and res.precision == 1.0 and res.recall == 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metric_identities_property(seed):
    local = np.random.default_rng(seed)
    pred = local.integers(0, 2, (10, 10))
    gt = local.integers(0, 2, (10, 10))
    tp, fp, fn, tn = confusion_counts(pred, gt)
    assert tp + fp + fn + tn == 100
    d, p, r = dice(pred, gt), precision(pred, gt), recall(pred, gt)
    assert 0 <= d <= 1 and 0 <= p <= 1 and 0 <= r <= 1
    if tp + fp > 0 and tp + fn > 0 and p + r > 0:
        assert abs(d - 2 * p * r / (p + r)) < 1e-12
