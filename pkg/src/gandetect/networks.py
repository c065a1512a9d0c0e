"""The conditional generator and the dual-head projection discriminator.

Layer widths are fixed by construction: the generator runs 128 -> 2d -> ...
-> d (depth 3 to 5, default 4 meaning widths 128, 2d, 2d, d) with ReLU on
the hidden layers and a sigmoid output; each discriminator runs a shared
trunk d -> 2d -> 2d (ReLU) feeding two scalar heads.  The adversarial head
adds an inner product between a label embedding and the trunk features
(projection conditioning); the auxiliary head ignores the label and is the
anomaly scorer.  Ensembles pair one generator with m discriminators, each
carrying its own learning rate to promote diversity.

Parameter values live in plain float64 arrays keyed by name; forward passes
optionally record onto the autodiff tape by passing a trace dict, which is
filled with name -> leaf Node for gradient extraction.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .numerics import ShapeError, init_embedding, init_layer
from .rng import SeededRng

NOISE_DIM = 128
GENERATOR_DEPTHS = (3, 4, 5)


def _check_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and not np.isin(labels, (0, 1)).all():
        raise ShapeError("labels must be 0 or 1")
    return labels.astype(np.int64)


class GeneratorNet:
    """Conditional generator: noise z times an embedded label, through an MLP."""

    def __init__(self, d: int, rng: SeededRng, depth: int = 4):
        if depth not in GENERATOR_DEPTHS:
            raise ShapeError(f"generator depth must be one of {GENERATOR_DEPTHS}, got {depth}")
        if d < 1:
            raise ShapeError(f"data dimension must be >= 1, got {d}")
        self.d = d
        self.depth = depth
        widths = [NOISE_DIM] + [2 * d] * (depth - 2) + [d]
        self.widths = widths
        # The label embedding gates the noise multiplicatively, so it starts
        # near 1 (identity gate); a zero-centered start would annihilate the
        # noise and freeze the generator at a constant output.
        self.params: dict[str, np.ndarray] = {
            "embedding": 1.0 + init_embedding(2, NOISE_DIM, rng)
        }
        for i in range(len(widths) - 1):
            W, b = init_layer(widths[i], widths[i + 1], rng)
            self.params[f"W{i}"] = W
            self.params[f"b{i}"] = b
        self.n_layers = len(widths) - 1

    def copy(self) -> "GeneratorNet":
        g = object.__new__(GeneratorNet)
        g.d, g.depth, g.widths, g.n_layers = self.d, self.depth, list(self.widths), self.n_layers
        g.params = {k: v.copy() for k, v in self.params.items()}
        return g


class DiscriminatorNet:
    """Shared trunk with an adversarial head (real vs fake) and an auxiliary
    head (anomaly vs normal).  projection=False drops the label inner-product
    term, leaving a plain affine adversarial head."""

    def __init__(self, d: int, rng: SeededRng, learning_rate: float, projection: bool = True):
        if d < 1:
            raise ShapeError(f"data dimension must be >= 1, got {d}")
        self.d = d
        self.learning_rate = float(learning_rate)
        self.projection = bool(projection)
        p: dict[str, np.ndarray] = {}
        p["W1"], p["b1"] = init_layer(d, 2 * d, rng)
        p["W2"], p["b2"] = init_layer(2 * d, 2 * d, rng)
        p["w_adv"], p["b_adv"] = init_layer(2 * d, 1, rng)
        p["proj"] = init_embedding(2, 2 * d, rng)
        p["w_aux"], p["b_aux"] = init_layer(2 * d, 1, rng)
        self.params = p

    def copy(self) -> "DiscriminatorNet":
        dnet = object.__new__(DiscriminatorNet)
        dnet.d = self.d
        dnet.learning_rate = self.learning_rate
        dnet.projection = self.projection
        dnet.params = {k: v.copy() for k, v in self.params.items()}
        return dnet


@dataclass
class EnsembleModel:
    generator: GeneratorNet
    discriminators: list[DiscriminatorNet]

    def __post_init__(self):
        if not self.discriminators:
            raise ShapeError("an ensemble needs at least one discriminator")
        if any(dn.d != self.generator.d for dn in self.discriminators):
            raise ShapeError("generator and discriminators disagree on data dimension")

    @property
    def d(self) -> int:
        return self.generator.d

    @property
    def m(self) -> int:
        return len(self.discriminators)

    def copy(self) -> "EnsembleModel":
        return EnsembleModel(self.generator.copy(), [dn.copy() for dn in self.discriminators])


def _wrap(params: dict[str, np.ndarray], trace: dict | None):
    """Leaf-wrap parameters when tracing; otherwise pass raw arrays through."""
    if trace is None:
        return params
    wrapped = {}
    for k, v in params.items():
        node = ad.leaf(v)
        trace[k] = node
        wrapped[k] = node
    return wrapped


def generator_forward(gen: GeneratorNet, Z, labels, trace: dict | None = None):
    """Map (noise, label) to a batch of synthetic feature rows in (0, 1)^d.

    The label conditions the generator multiplicatively: the first layer sees
    Z * embedding[label] elementwise, keeping the input width at 128.
    """
    labels = _check_labels(labels)
    Zv = ad.value_of(Z)
    if Zv.shape[1] != NOISE_DIM:
        raise ShapeError(f"noise must be (batch x {NOISE_DIM}), got {Zv.shape}")
    if Zv.shape[0] != labels.shape[0]:
        raise ShapeError(f"batch mismatch: {Zv.shape[0]} noise rows, {labels.shape[0]} labels")
    p = _wrap(gen.params, trace)
    h = ad.mul(Z, ad.embedding(p["embedding"], labels))
    for i in range(gen.n_layers - 1):
        h = ad.relu(ad.affine(h, p[f"W{i}"], p[f"b{i}"]))
    last = gen.n_layers - 1
    return ad.sigmoid(ad.affine(h, p[f"W{last}"], p[f"b{last}"]))


def discriminator_forward(disc: DiscriminatorNet, X, labels, trace: dict | None = None):
    """Return (adversarial_prob, anomaly_prob), each (batch x 1) in (0, 1).

    The anomaly head never sees the label; the adversarial head adds the
    projection term embedding[label] . trunk(x) when enabled.

    The trunk reads the input shifted by -0.5.  Features arrive min-max
    normalized to [0, 1], and on an all-positive orthant a quarter of the
    freshly initialized first-layer ReLU units are dead on every input and
    can never recover; centering removes that failure mode while leaving the
    layer the same affine-plus-ReLU map under a reparameterized bias.
    """
    labels = _check_labels(labels)
    Xv = ad.value_of(X)
    if Xv.shape[1] != disc.d:
        raise ShapeError(f"input is (batch x {Xv.shape[1]}) but discriminator expects d={disc.d}")
    if Xv.shape[0] != labels.shape[0]:
        raise ShapeError(f"batch mismatch: {Xv.shape[0]} rows, {labels.shape[0]} labels")
    p = _wrap(disc.params, trace)
    if isinstance(X, ad.Node):
        X = ad.add(X, np.full(Xv.shape, -0.5))
    else:
        X = Xv - 0.5
    h = ad.relu(ad.affine(X, p["W1"], p["b1"]))
    h = ad.relu(ad.affine(h, p["W2"], p["b2"]))
    adv_logit = ad.affine(h, p["w_adv"], p["b_adv"])
    if disc.projection:
        adv_logit = ad.add(adv_logit, ad.rowdot(ad.embedding(p["proj"], labels), h))
    adv_prob = ad.sigmoid(adv_logit)
    aux_prob = ad.sigmoid(ad.affine(h, p["w_aux"], p["b_aux"]))
    return adv_prob, aux_prob


def build_ensemble(d: int, m: int, rng: SeededRng, disc_lr_range=(0.01, 0.05),
                   depth: int = 4, projection: bool = True) -> EnsembleModel:
    """One generator plus m discriminators, each with its own learning rate
    drawn uniformly from disc_lr_range."""
    lo, hi = disc_lr_range
    if m < 1:
        raise ShapeError(f"need at least one discriminator, got m={m}")
    if not 0 < lo <= hi:
        raise ShapeError(f"bad learning-rate range [{lo}, {hi}]")
    gen = GeneratorNet(d, rng, depth=depth)
    discs = []
    for _ in range(m):
        lr = rng.uniform(lo, hi)
        discs.append(DiscriminatorNet(d, rng, learning_rate=lr, projection=projection))
    return EnsembleModel(gen, discs)


# ---------------------------------------------------------------------------
# Checkpoints.  JSON with floats serialized via repr, which round-trips
# float64 bit-exactly; format_version guards future layout changes.

CHECKPOINT_VERSION = 1


def save_checkpoint(path: str, model: EnsembleModel, train_config: dict | None = None,
                    normalizer=None) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "d": model.d,
        "m": model.m,
        "generator": {
            "depth": model.generator.depth,
            "params": {k: v.tolist() for k, v in model.generator.params.items()},
        },
        "discriminators": [
            {
                "learning_rate": dn.learning_rate,
                "projection": dn.projection,
                "params": {k: v.tolist() for k, v in dn.params.items()},
            }
            for dn in model.discriminators
        ],
        "train_config": train_config,
        "normalizer": None if normalizer is None else {
            "feature_min": normalizer.feature_min.tolist(),
            "feature_max": normalizer.feature_max.tolist(),
        },
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def load_checkpoint(path: str):
    """Returns (model, train_config_dict_or_None, normalizer_or_None)."""
    from .data import NormalizerState

    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    d = payload["d"]
    scratch = SeededRng(0)
    gen = GeneratorNet(d, scratch, depth=payload["generator"]["depth"])
    gen.params = {k: np.asarray(v, dtype=np.float64) for k, v in payload["generator"]["params"].items()}
    discs = []
    for spec in payload["discriminators"]:
        dn = DiscriminatorNet(d, scratch, learning_rate=spec["learning_rate"],
                              projection=spec["projection"])
        dn.params = {k: np.asarray(v, dtype=np.float64) for k, v in spec["params"].items()}
        discs.append(dn)
    model = EnsembleModel(gen, discs)
    norm = None
    if payload.get("normalizer"):
        norm = NormalizerState(
            np.asarray(payload["normalizer"]["feature_min"], dtype=np.float64),
            np.asarray(payload["normalizer"]["feature_max"], dtype=np.float64),
        )
    return model, payload.get("train_config"), norm
