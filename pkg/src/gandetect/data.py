"""Dataset handling: CSV ingestion, min-max normalization, splits, synthesis.

Labels are binary throughout: 1 marks an anomaly, 0 marks normal data.
Features are min-max normalized to [0, 1] on the training portion because the
generator emits values through a sigmoid; sets transformed with a fitted
normalizer may legitimately fall outside [0, 1] and are not clamped.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .numerics import round_half_up
from .rng import SeededRng, STREAM_SPLIT, STREAM_SYNTH

CLUSTER_TYPES = ("single_cluster", "multi_cluster", "multi_density")

# Anomalies are drawn uniformly over the normals' bounding box expanded by
# this fraction of the span on each side.  The box must dwarf the clusters:
# with a snug box most "anomalies" land inside the normal clusters' support
# and even a Bayes-optimal detector cannot separate the classes.
ANOMALY_BOX_EXPANSION = 1.5


class DataError(ValueError):
    """Raised for malformed files, labels, or split requests."""


@dataclass
class Dataset:
    """A feature matrix with binary labels."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str] | None = None
    source_tag: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise DataError(f"X must be 2-D, got shape {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise DataError(f"y has shape {self.y.shape}, expected ({self.X.shape[0]},)")
        if self.n < 2:
            raise DataError(f"a dataset needs at least 2 samples, got {self.n}")
        bad = np.setdiff1d(np.unique(self.y), [0, 1])
        if bad.size:
            raise DataError(f"labels must be 0 or 1, found {bad.tolist()}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def anomaly_count(self) -> int:
        return int(self.y.sum())

    def subset(self, idx: np.ndarray, tag_suffix: str = "") -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.feature_names,
                       self.source_tag + tag_suffix)


@dataclass
class NormalizerState:
    """Per-feature min and max collected from the fitting set."""

    feature_min: np.ndarray
    feature_max: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        span = self.feature_max - self.feature_min
        safe = np.where(span > 0.0, span, 1.0)
        out = (X - self.feature_min) / safe
        # Constant features carry no information; map them to exactly 0.
        return np.where(span > 0.0, out, 0.0)


def normalize_fit_apply(train: Dataset, *others: Dataset):
    """Fit min-max on train, apply to train and any further datasets.

    Returns (normalized_train, [normalized_others...], state).
    """
    if train.n == 0:
        raise DataError("cannot fit a normalizer on an empty dataset")
    state = NormalizerState(train.X.min(axis=0), train.X.max(axis=0))
    norm_train = Dataset(state.apply(train.X), train.y, train.feature_names, train.source_tag)
    norm_others = [Dataset(state.apply(o.X), o.y, o.feature_names, o.source_tag) for o in others]
    return norm_train, norm_others, state


def load_csv(path: str, label_column: str | int | None = None) -> Dataset:
    """Load a comma-separated dataset.

    The header row is optional and is detected by attempting to parse the
    first row as numbers.  label_column may be a header name, a 0-based
    column index, or None for the last column.
    """
    if not os.path.exists(path):
        raise DataError(f"dataset file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: file is empty")

    header: list[str] | None = None
    first = rows[0]
    if not all(_is_number(c) for c in first):
        header = [c.strip() for c in first]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header only, no data rows")

    width = len(rows[0])
    if isinstance(label_column, str):
        if header is None:
            raise DataError(f"{path}: label column {label_column!r} given but file has no header")
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r} in header {header}")
        label_idx = header.index(label_column)
    elif isinstance(label_column, int):
        label_idx = label_column if label_column >= 0 else width + label_column
        if not 0 <= label_idx < width:
            raise DataError(f"{path}: label column index {label_column} out of range for width {width}")
    else:
        label_idx = width - 1

    X = np.empty((len(rows), width - 1))
    y = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        rownum = i + (2 if header is not None else 1)
        if len(row) != width:
            raise DataError(f"{path}: row {rownum} has {len(row)} cells, expected {width}")
        col = 0
        for j, cell in enumerate(row):
            if j == label_idx:
                lab = cell.strip()
                if lab not in ("0", "1"):
                    raise DataError(f"{path}: row {rownum}: label {lab!r} is not 0 or 1")
                y[i] = int(lab)
            else:
                try:
                    X[i, col] = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {rownum}, column {j + 1}: non-numeric cell {cell!r}"
                    ) from None
                col += 1

    names = None
    if header is not None:
        names = [h for j, h in enumerate(header) if j != label_idx]
    return Dataset(X, y, names, source_tag=os.path.basename(path))


def save_csv(ds: Dataset, path: str, label_name: str = "label") -> None:
    """Write features plus a trailing label column; floats round-trip exactly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        names = ds.feature_names or [f"f{j}" for j in range(ds.d)]
        w.writerow(list(names) + [label_name])
        for i in range(ds.n):
            w.writerow([repr(float(v)) for v in ds.X[i]] + [int(ds.y[i])])


def split(data: Dataset, train_fraction: float, seed: int, stratified: bool = True):
    """Random (train, test) partition.

    Train size is round(n * fraction).  Stratified mode (default) keeps each
    class ratio within one sample of the global ratio and errors out if a
    class would end up absent from the training side; plain mode reproduces
    an unstratified random split.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = SeededRng(seed, STREAM_SPLIT)
    n_train = round_half_up(data.n * train_fraction)

    if stratified:
        pos = np.flatnonzero(data.y == 1)
        neg = np.flatnonzero(data.y == 0)
        n_pos_train = min(round_half_up(len(pos) * train_fraction), n_train)
        n_neg_train = n_train - n_pos_train
        if n_neg_train > len(neg):
            n_pos_train += n_neg_train - len(neg)
            n_neg_train = len(neg)
        if n_pos_train == 0 or n_neg_train == 0:
            raise DataError(
                f"stratified split leaves a class empty in training "
                f"(anomalies: {n_pos_train}, normals: {n_neg_train})"
            )
        pos = pos[rng.permutation(len(pos))]
        neg = neg[rng.permutation(len(neg))]
        train_idx = np.concatenate([pos[:n_pos_train], neg[:n_neg_train]])
        train_idx = train_idx[rng.permutation(len(train_idx))]
        test_idx = np.concatenate([pos[n_pos_train:], neg[n_neg_train:]])
        test_idx = test_idx[rng.permutation(len(test_idx))]
    else:
        perm = rng.permutation(data.n)
        train_idx, test_idx = perm[:n_train], perm[n_train:]

    return data.subset(train_idx, ":train"), data.subset(test_idx, ":test")


@dataclass
class SynthConfig:
    """Settings for the synthetic cluster generators."""

    cluster_type: str
    n: int = 1000
    d: int = 2
    anomaly_ratio: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if self.cluster_type not in CLUSTER_TYPES:
            raise DataError(f"cluster_type must be one of {CLUSTER_TYPES}, got {self.cluster_type!r}")
        if not 1000 <= self.n <= 20000:
            raise DataError(f"n must be in [1000, 20000], got {self.n}")
        if not 2 <= self.d <= 160:
            raise DataError(f"d must be in [2, 160], got {self.d}")
        if not 0.02 <= self.anomaly_ratio <= 0.20:
            raise DataError(f"anomaly_ratio must be in [0.02, 0.20], got {self.anomaly_ratio}")

    @property
    def anomaly_count(self) -> int:
        return max(1, round_half_up(self.n * self.anomaly_ratio))


def _separated_means(rng: SeededRng, count: int, d: int, min_dist: float) -> np.ndarray:
    """Cluster centers with pairwise distance >= min_dist, by rejection."""
    box = min_dist * count
    means = []
    while len(means) < count:
        cand = rng.uniform(0.0, box, size=d)
        if all(np.linalg.norm(cand - m) >= min_dist for m in means):
            means.append(cand)
    return np.stack(means)


def synthesize(cfg: SynthConfig) -> Dataset:
    """Generate one of the three synthetic cluster layouts.

    Normals are Gaussian; anomalies are uniform over the normals' bounding
    box expanded by ANOMALY_BOX_EXPANSION per side.  Cluster geometry:
    single_cluster is one isotropic unit Gaussian; multi_cluster uses 3-5
    unit Gaussians with centers at least 6 sigma apart; multi_density uses 3
    Gaussians with sigma ratio 1:2:4 and proportionally separated centers.
    """
    rng = SeededRng(cfg.seed, STREAM_SYNTH)
    n_anom = cfg.anomaly_count
    n_norm = cfg.n - n_anom

    if cfg.cluster_type == "single_cluster":
        normals = rng.normal(size=(n_norm, cfg.d))
    elif cfg.cluster_type == "multi_cluster":
        k = int(rng.integers(3, 6))
        means = _separated_means(rng, k, cfg.d, min_dist=6.0)
        sizes = _even_sizes(n_norm, k)
        parts = [means[j] + rng.normal(size=(sizes[j], cfg.d)) for j in range(k)]
        normals = np.concatenate(parts)
    else:  # multi_density
        sigmas = np.array([1.0, 2.0, 4.0])
        means = _separated_means(rng, 3, cfg.d, min_dist=6.0 * sigmas.max())
        sizes = _even_sizes(n_norm, 3)
        parts = [means[j] + sigmas[j] * rng.normal(size=(sizes[j], cfg.d)) for j in range(3)]
        normals = np.concatenate(parts)

    lo = normals.min(axis=0)
    hi = normals.max(axis=0)
    pad = ANOMALY_BOX_EXPANSION * (hi - lo)
    anomalies = rng.uniform(size=(n_anom, cfg.d)) * ((hi + pad) - (lo - pad)) + (lo - pad)

    X = np.concatenate([normals, anomalies])
    y = np.concatenate([np.zeros(n_norm, dtype=np.int64), np.ones(n_anom, dtype=np.int64)])
    order = rng.permutation(cfg.n)
    tag = f"synth:{cfg.cluster_type}:n={cfg.n}:d={cfg.d}:r={cfg.anomaly_ratio}:seed={cfg.seed}"
    return Dataset(X[order], y[order], None, tag)


def _even_sizes(total: int, parts: int) -> list[int]:
    base, rem = divmod(total, parts)
    return [base + (1 if j < rem else 0) for j in range(parts)]


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False
