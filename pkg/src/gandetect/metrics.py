"""Detection rule, AUC, Gmean, rank statistics, and boundary-grid export."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .sampling import ensemble_score


class MetricError(ValueError):
    """A metric is undefined for the given inputs."""


@dataclass
class MetricsReport:
    auc: float
    gmean: float
    tp_rate: float
    tn_rate: float
    n_pos: int
    n_neg: int
    threshold: float = 0.5


def predict(model, X: np.ndarray):
    """Anomaly scores and hard labels: anomaly iff score strictly above 0.5."""
    scores = ensemble_score(model, X)
    return scores, (scores > 0.5).astype(np.int64)


def _ranks_with_ties(values: np.ndarray) -> np.ndarray:
    """1-based ranks of values ascending; tied values share the average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sv = values[order]
    i = 0
    while i < len(sv):
        j = i
        while j + 1 < len(sv) and sv[j + 1] == sv[i]:
            j += 1
        # positions i..j (0-based) share the average of ranks i+1..j+1
        avg = (i + j + 2) / 2.0
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks


def auc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) area under the ROC curve.

    Ties contribute half a concordant pair via average ranks, so this equals
    P(score_pos > score_neg) + 0.5 * P(score_pos = score_neg) exactly.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricError(f"AUC undefined: {n_pos} positives, {n_neg} negatives")
    ranks = _ranks_with_ties(scores)
    rank_sum_pos = float(np.sum(ranks[labels == 1]))
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def rates(labels_pred, labels_true):
    """(tp_rate, tn_rate) of a hard prediction."""
    pred = np.asarray(labels_pred).ravel()
    true = np.asarray(labels_true).ravel()
    n_pos = int(np.sum(true == 1))
    n_neg = int(np.sum(true == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricError(f"rates undefined: {n_pos} positives, {n_neg} negatives")
    tp = int(np.sum((pred == 1) & (true == 1)))
    tn = int(np.sum((pred == 0) & (true == 0)))
    return tp / n_pos, tn / n_neg


def gmean(labels_pred, labels_true) -> float:
    """Geometric mean of the true-positive and true-negative rates."""
    tp_rate, tn_rate = rates(labels_pred, labels_true)
    return float(np.sqrt(tp_rate * tn_rate))


def evaluate(model, X, y) -> MetricsReport:
    """Score a trained ensemble on labeled data."""
    scores, pred = predict(model, X)
    tp_rate, tn_rate = rates(pred, y)
    return MetricsReport(
        auc=auc(scores, y),
        gmean=float(np.sqrt(tp_rate * tn_rate)),
        tp_rate=tp_rate,
        tn_rate=tn_rate,
        n_pos=int(np.sum(np.asarray(y) == 1)),
        n_neg=int(np.sum(np.asarray(y) == 0)),
    )


@dataclass
class RankTable:
    """Per-dataset ranks of competing methods; rank 1 is best."""

    scores: np.ndarray            # (N datasets x k methods), higher is better
    ranks: np.ndarray             # (N x k), average-tie convention
    average_ranks: np.ndarray     # (k,)
    method_names: list[str] | None = None


def friedman_ranks(score_matrix, method_names=None) -> RankTable:
    """Rank methods per dataset (1 = best, ties averaged) and average columns."""
    scores = np.asarray(score_matrix, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] < 2 or scores.shape[1] < 2:
        raise MetricError(f"need an (N>=2 x k>=2) score matrix, got {scores.shape}")
    n, k = scores.shape
    ranks = np.empty_like(scores)
    for i in range(n):
        # higher score means better, i.e. lower rank
        ranks[i] = _ranks_with_ties(-scores[i])
    return RankTable(scores, ranks, ranks.mean(axis=0), method_names)


def nemenyi_cd(k: int, n: int, q_a: float) -> float:
    """Critical difference for comparing k methods over n datasets."""
    if k < 2 or n < 1:
        raise MetricError(f"need k >= 2 and N >= 1, got k={k}, N={n}")
    return q_a * float(np.sqrt(k * (k + 1) / (6.0 * n)))


def boundary_grid(model, bounds, resolution: int) -> np.ndarray:
    """Ensemble scores over a 2-D lattice; rows are (x, y, score).

    bounds is (x_min, x_max, y_min, y_max); the lattice includes the corners
    and varies y fastest.
    """
    if model.d != 2:
        raise MetricError(f"boundary grids need 2-D data, model has d={model.d}")
    if resolution < 2:
        raise MetricError(f"resolution must be >= 2, got {resolution}")
    x_min, x_max, y_min, y_max = bounds
    xs = np.linspace(x_min, x_max, resolution)
    ys = np.linspace(y_min, y_max, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    scores = ensemble_score(model, pts)
    return np.column_stack([pts, scores])


def save_grid_csv(path: str, grid: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "score"])
        for row in grid:
            w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2]))])
