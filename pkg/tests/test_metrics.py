import numpy as np
import pytest

from gandetect.metrics import (
    MetricError,
    auc,
    boundary_grid,
    evaluate,
    friedman_ranks,
    gmean,
    nemenyi_cd,
    predict,
    rates,
    save_grid_csv,
)
from gandetect.networks import build_ensemble
from gandetect.rng import SeededRng
from gandetect.sampling import ensemble_score


def brute_force_auc(scores, labels):
    """Pairwise counting oracle: concordant pairs plus half the ties."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    num = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                num += 1.0
            elif p == q:
                num += 0.5
    return num / (len(pos) * len(neg))


class TestAuc:
    def test_perfect_separation(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties_give_half(self):
        assert auc([0.4, 0.4, 0.4, 0.4], [0, 1, 0, 1]) == 0.5

    def test_hand_example(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)

    def test_single_class_raises(self):
        with pytest.raises(MetricError):
            auc([0.1, 0.9], [1, 1])

    def test_matches_brute_force_exactly(self):
        rng = SeededRng(0)
        for _ in range(300):
            n = int(rng.integers(2, 40))
            labels = (rng.uniform(size=n) < 0.4).astype(np.int64)
            if labels.sum() in (0, n):
                labels[0] = 1 - labels[0]
            # quantized scores force plenty of ties
            scores = np.round(rng.uniform(size=n), 1)
            assert auc(scores, labels) == brute_force_auc(scores, labels)

    def test_invariant_to_monotone_transform(self):
        rng = SeededRng(1)
        scores = rng.uniform(size=60)
        labels = (rng.uniform(size=60) < 0.3).astype(np.int64)
        labels[0] = 1; labels[1] = 0
        assert auc(scores, labels) == pytest.approx(auc(scores ** 3, labels), abs=1e-12)

    def test_negation_complements(self):
        rng = SeededRng(2)
        scores = rng.uniform(size=50)  # continuous draws: no ties
        labels = (rng.uniform(size=50) < 0.5).astype(np.int64)
        labels[0] = 1; labels[1] = 0
        assert auc(scores, labels) + auc(-scores, labels) == pytest.approx(1.0, abs=1e-12)


class TestGmean:
    def test_perfect(self):
        assert gmean([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0

    def test_all_normal_prediction_zero(self):
        assert gmean([0, 0, 0, 0], [0, 0, 1, 1]) == 0.0

    def test_hand_rates(self):
        # tp_rate 0.9, tn_rate 0.4 -> sqrt(0.36) = 0.6
        true = np.array([1] * 10 + [0] * 10)
        pred = np.array([1] * 9 + [0] + [1] * 6 + [0] * 4)
        tp, tn = rates(pred, true)
        assert (tp, tn) == (0.9, 0.4)
        assert gmean(pred, true) == pytest.approx(0.6)

    def test_single_class_truth_raises(self):
        with pytest.raises(MetricError):
            gmean([0, 1], [1, 1])


class TestPredict:
    def test_boundary_is_strict(self):
        rng = SeededRng(3)
        model = build_ensemble(2, 2, rng)
        X = rng.uniform(size=(4, 2))
        scores, labels = predict(model, X)
        assert np.array_equal(labels, (scores > 0.5).astype(np.int64))
        assert ((0.5 > 0.5) and 1 or 0) == 0  # exactly 0.5 maps to normal

    def test_idempotent_on_labels(self):
        rng = SeededRng(4)
        model = build_ensemble(2, 2, rng)
        X = rng.uniform(size=(10, 2))
        _, l1 = predict(model, X)
        _, l2 = predict(model, X)
        assert np.array_equal(l1, l2)


class TestFriedman:
    def test_identical_columns_tie(self):
        table = friedman_ranks(np.array([[0.5, 0.5], [0.7, 0.7], [0.2, 0.2]]))
        assert np.allclose(table.average_ranks, [1.5, 1.5])

    def test_dominant_method(self):
        table = friedman_ranks(np.array([[0.9, 0.1], [0.8, 0.3]]))
        assert table.average_ranks.tolist() == [1.0, 2.0]

    def test_matches_sorting_oracle(self):
        rng = SeededRng(5)
        scores = rng.uniform(size=(3, 3))
        table = friedman_ranks(scores)
        for i in range(3):
            row = scores[i]
            expect = np.empty(3)
            for j in range(3):
                expect[j] = 1 + sum(1 for v in row if v > row[j]) + \
                    (sum(1 for v in row if v == row[j]) - 1) / 2.0
            assert np.allclose(table.ranks[i], expect)

    def test_row_ranks_sum(self):
        rng = SeededRng(6)
        k = 5
        table = friedman_ranks(rng.uniform(size=(8, k)))
        assert np.allclose(table.ranks.sum(axis=1), k * (k + 1) / 2)

    def test_shape_guard(self):
        with pytest.raises(MetricError):
            friedman_ranks(np.zeros((1, 4)))


class TestNemenyi:
    def test_reference_value(self):
        assert nemenyi_cd(10, 20, 3.164) == pytest.approx(3.03, abs=0.01)

    def test_zero_q(self):
        assert nemenyi_cd(5, 10, 0.0) == 0.0

    def test_direct_formula(self):
        assert nemenyi_cd(2, 6, 1.0) == pytest.approx(np.sqrt(6 / 36), abs=1e-12)


class TestBoundaryGrid:
    def test_grid_size_and_range(self):
        model = build_ensemble(2, 2, SeededRng(7))
        grid = boundary_grid(model, (0.0, 1.0, 0.0, 1.0), resolution=3)
        assert grid.shape == (9, 3)
        assert np.all((grid[:, 2] >= 0) & (grid[:, 2] <= 1))

    def test_lattice_value_matches_predict(self):
        model = build_ensemble(2, 3, SeededRng(8))
        grid = boundary_grid(model, (-0.5, 1.5, -0.5, 1.5), resolution=5)
        point = grid[7, :2][None, :]
        score = ensemble_score(model, point)[0]
        assert grid[7, 2] == pytest.approx(score, abs=1e-12)

    def test_dimension_guard(self):
        model = build_ensemble(3, 1, SeededRng(9))
        with pytest.raises(MetricError):
            boundary_grid(model, (0, 1, 0, 1), resolution=4)

    def test_csv_round_trip(self, tmp_path):
        model = build_ensemble(2, 1, SeededRng(10))
        grid = boundary_grid(model, (0.0, 1.0, 0.0, 1.0), resolution=4)
        path = tmp_path / "grid.csv"
        save_grid_csv(str(path), grid)
        back = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.allclose(back, grid, atol=1e-15)


def test_evaluate_report_fields():
    rng = SeededRng(11)
    model = build_ensemble(2, 2, rng)
    X = rng.uniform(size=(40, 2))
    y = (rng.uniform(size=40) < 0.3).astype(np.int64)
    y[0] = 1; y[1] = 0
    report = evaluate(model, X, y)
    assert 0.0 <= report.auc <= 1.0
    assert report.gmean == pytest.approx(np.sqrt(report.tp_rate * report.tn_rate))
    assert report.n_pos + report.n_neg == 40
    assert report.threshold == 0.5
