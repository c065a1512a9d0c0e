"""Uncertainty-driven label selection, the simulated annotator, and fake batches.

The ensemble's averaged anomaly score doubles as an uncertainty measure: the
samples scored closest to 0.5 sit nearest the decision boundary and are the
ones worth paying for labels.  The oracle simulates a human annotator with a
counted (optionally capped) budget; revealing the same index twice is free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .networks import EnsembleModel, generator_forward, discriminator_forward, NOISE_DIM
from .numerics import round_half_up


class BudgetExhaustedError(RuntimeError):
    """The label oracle's annotation budget would be exceeded."""


@dataclass
class SamplingConfig:
    """Selection ratio rho over mini-batches of size n_bs."""

    rho: float = 0.05
    n_bs: int = 128

    def __post_init__(self):
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must be in (0, 1], got {self.rho}")
        if self.n_bs < 1:
            raise ValueError(f"batch size must be >= 1, got {self.n_bs}")

    @property
    def select_count(self) -> int:
        return max(1, min(self.n_bs, round_half_up(self.n_bs * self.rho)))


class LabelOracle:
    """Holds the hidden ground truth and counts distinct labels revealed."""

    def __init__(self, labels: np.ndarray, budget: int | None = None):
        self._labels = np.asarray(labels, dtype=np.int64)
        self.budget = budget
        self._revealed: set[int] = set()

    @property
    def labels_revealed(self) -> int:
        return len(self._revealed)

    @property
    def n(self) -> int:
        return len(self._labels)

    def reveal(self, indices) -> np.ndarray:
        """Ground-truth labels for the requested indices.

        Only indices never seen before count against the budget; asking for
        the same sample again is idempotent.
        """
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise IndexError(f"oracle index out of range 0..{self.n - 1}")
        new = {int(i) for i in idx} - self._revealed
        if self.budget is not None and self.labels_revealed + len(new) > self.budget:
            raise BudgetExhaustedError(
                f"label budget {self.budget} exhausted "
                f"({self.labels_revealed} revealed, {len(new)} more requested)"
            )
        self._revealed |= new
        return self._labels[idx]


def ensemble_score(model: EnsembleModel, X: np.ndarray) -> np.ndarray:
    """Anomaly score per row: the auxiliary heads' outputs averaged over the
    ensemble.  Label input is irrelevant to the auxiliary head."""
    X = np.asarray(X, dtype=np.float64)
    dummy = np.zeros(X.shape[0], dtype=np.int64)
    total = np.zeros((X.shape[0], 1))
    for dn in model.discriminators:
        total += discriminator_forward(dn, X, dummy)[1]
    return (total / model.m).ravel()


def active_select(scores: np.ndarray, cfg: SamplingConfig) -> np.ndarray:
    """Indices of the cfg.select_count samples whose scores sit closest to 0.5.

    Ties break toward the lower index so selection is deterministic.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or len(scores) != cfg.n_bs:
        raise ValueError(f"expected {cfg.n_bs} scores, got shape {scores.shape}")
    gap = np.abs(scores - 0.5)
    # stable argsort keeps the lower index first among equal gaps
    order = np.argsort(gap, kind="stable")
    return np.sort(order[: cfg.select_count])


def random_select(n_bs: int, count: int, rng) -> np.ndarray:
    """Uniform selection of the same count, for the random-sampling ablation."""
    return np.sort(rng.choice(n_bs, count))


def balanced_labels(n: int) -> np.ndarray:
    """Alternating 0/1 labels; any prefix is balanced to within one sample."""
    return np.arange(n, dtype=np.int64) % 2


def sample_fake_batch(gen, n: int, rng, balanced: bool = True):
    """Draw standard-normal noise and run the generator.

    Returns (X_fake, y_fake).  Balanced mode alternates the condition label
    so anomaly and normal counts differ by at most one.
    """
    if n < 1:
        raise ValueError(f"fake batch size must be >= 1, got {n}")
    Z = rng.normal(size=(n, NOISE_DIM))
    if balanced:
        y = balanced_labels(n)
    else:
        y = (rng.uniform(size=n) < 0.5).astype(np.int64)
    return generator_forward(gen, Z, y), y
