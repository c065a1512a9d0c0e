"""Ensemble loss formulas with sequential modulating factors.

Each discriminator k is trained against the deficiencies of discriminators
1..k-1: every per-sample log term is weighted by (1 - p)^2 where p is the
average probability that the preceding ensemble members already handle that
sample correctly.  Samples the predecessors classify confidently are damped
toward zero weight; misclassified samples keep full weight.  For k = 1 the
averages are defined as 0, so every factor is exactly 1 and the formulas
reduce to plain conditional-GAN binary cross-entropies.

The factors are constants for gradient purposes: they are evaluations of
other (frozen) networks, and no gradient flows through them.  Losses here
take probability columns and return the scalar value together with the
gradient at those probabilities; parameter gradients are obtained by seeding
the autodiff tape with these output gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .networks import EnsembleModel, discriminator_forward
from .numerics import NumericsError


def modulating_factor(p):
    """Weight (1 - p)^2 for an average predecessor probability p in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    if np.any((p < 0.0) | (p > 1.0)):
        raise NumericsError("modulating factor input must lie in [0, 1]")
    return (1.0 - p) ** 2


@dataclass
class ModulatingContext:
    """Per-sample predecessor averages for the k-th ensemble member.

    Any field left as None means "no predecessors" and yields factors of 1;
    this is always the case for k = 1.  p_real / p_fake drive the adversarial
    loss, p_aux_real / p_aux_fake the auxiliary loss, and p_gen the
    generator's adversarial term.
    """

    k: int = 1
    p_real: np.ndarray | None = None
    p_fake: np.ndarray | None = None
    p_aux_real: np.ndarray | None = None
    p_aux_fake: np.ndarray | None = None
    p_gen: np.ndarray | None = None


@dataclass
class CostWeights:
    """Misclassification costs: c1 for anomalies, c0 for normal data."""

    c1: float = 1.0
    c0: float = 1.0

    def __post_init__(self):
        if self.c1 <= 0 or self.c0 <= 0:
            raise NumericsError(f"costs must be positive, got ({self.c1}, {self.c0})")


def _weights(p: np.ndarray | None, n: int) -> np.ndarray:
    if p is None:
        return np.ones((n, 1))
    p = np.asarray(p, dtype=np.float64).reshape(n, 1)
    return modulating_factor(p)


def _col(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a.reshape(-1, 1)


def truth_probability(phi, labels) -> np.ndarray:
    """Probability the auxiliary head assigns to the ground-truth class."""
    phi = _col(phi)
    lab = np.asarray(labels).reshape(-1, 1)
    return np.where(lab == 1, phi, 1.0 - phi)


def disc_adversarial_loss(c_real, c_fake, ctx: ModulatingContext):
    """Real/fake discrimination loss for member k.

    Returns (value, grad_at_c_real, grad_at_c_fake).  Either side may be
    empty, in which case its term is zero.
    """
    c_real, c_fake = _col(c_real), _col(c_fake)
    n_r, n_f = len(c_real), len(c_fake)
    value = 0.0
    g_real = np.zeros_like(c_real)
    g_fake = np.zeros_like(c_fake)
    if n_r:
        w = _weights(ctx.p_real, n_r)
        value -= float(np.sum(w * np.log(c_real))) / n_r
        g_real = -w / (n_r * c_real)
    if n_f:
        w = _weights(ctx.p_fake, n_f)
        value -= float(np.sum(w * np.log(1.0 - c_fake))) / n_f
        g_fake = w / (n_f * (1.0 - c_fake))
    return value, g_real, g_fake


def disc_auxiliary_loss(phi_real, y_real, phi_fake, y_fake, ctx: ModulatingContext):
    """Anomaly/normal classification loss for member k.

    Returns (value, grad_at_phi_real, grad_at_phi_fake).
    """
    phi_real, phi_fake = _col(phi_real), _col(phi_fake)
    n_r, n_f = len(phi_real), len(phi_fake)
    value = 0.0
    g_real = np.zeros_like(phi_real)
    g_fake = np.zeros_like(phi_fake)
    if n_r:
        w = _weights(ctx.p_aux_real, n_r)
        p_true = truth_probability(phi_real, y_real)
        value -= float(np.sum(w * np.log(p_true))) / n_r
        sign = np.where(np.asarray(y_real).reshape(-1, 1) == 1, 1.0, -1.0)
        g_real = -sign * w / (n_r * p_true)
    if n_f:
        w = _weights(ctx.p_aux_fake, n_f)
        p_true = truth_probability(phi_fake, y_fake)
        value -= float(np.sum(w * np.log(p_true))) / n_f
        sign = np.where(np.asarray(y_fake).reshape(-1, 1) == 1, 1.0, -1.0)
        g_fake = -sign * w / (n_f * p_true)
    return value, g_real, g_fake


def disc_total_loss(adversarial: float, auxiliary: float) -> float:
    """Overall loss for one discriminator: adversarial plus auxiliary parts."""
    return adversarial + auxiliary


def gen_adversarial_loss(c_fake, ctx: ModulatingContext):
    """Non-saturating generator loss against member k: -mean w * log C(fake).

    Fakes that already fool the predecessors (high p_gen) are down-weighted.
    Returns (value, grad_at_c_fake).
    """
    c_fake = _col(c_fake)
    n_f = len(c_fake)
    if n_f == 0:
        return 0.0, np.zeros_like(c_fake)
    w = _weights(ctx.p_gen, n_f)
    value = -float(np.sum(w * np.log(c_fake))) / n_f
    return value, -w / (n_f * c_fake)


def gen_auxiliary_loss(phi_fake, y_fake, ctx: ModulatingContext):
    """Fake-only auxiliary loss for the generator against member k.

    Returns (value, grad_at_phi_fake).
    """
    phi_fake = _col(phi_fake)
    n_f = len(phi_fake)
    if n_f == 0:
        return 0.0, np.zeros_like(phi_fake)
    w = _weights(ctx.p_aux_fake, n_f)
    p_true = truth_probability(phi_fake, y_fake)
    value = -float(np.sum(w * np.log(p_true))) / n_f
    sign = np.where(np.asarray(y_fake).reshape(-1, 1) == 1, 1.0, -1.0)
    return value, -sign * w / (n_f * p_true)


def weighted_bce(phi, y, costs: CostWeights):
    """Cost-weighted binary cross-entropy over anomaly probabilities.

    Returns (value, grad_at_phi).
    """
    phi = _col(phi)
    lab = np.asarray(y).reshape(-1, 1)
    n = len(phi)
    if n == 0:
        raise NumericsError("weighted_bce needs at least one sample")
    terms = costs.c1 * lab * np.log(phi) + costs.c0 * (1 - lab) * np.log(1.0 - phi)
    grad = -(costs.c1 * lab / phi - costs.c0 * (1 - lab) / (1.0 - phi)) / n
    return -float(np.sum(terms)) / n, grad


# ---------------------------------------------------------------------------
# Context construction.


def _mean_or_none(parts: list[np.ndarray]):
    if not parts:
        return None
    return np.mean(np.stack(parts), axis=0)


def discriminator_context(discs, k: int, X_real, y_real, X_fake_adv, y_fake_adv,
                          X_fake_aux, y_fake_aux) -> ModulatingContext:
    """Averages over members 1..k-1 for training member k (1-based).

    Predecessors are evaluated with their current parameters, so calling this
    inside a sequential update loop realizes the boosting-style semantics
    where member k reacts to already-updated predecessors.
    """
    if not 1 <= k <= len(discs):
        raise NumericsError(f"member index k={k} out of range 1..{len(discs)}")
    p_real, p_fake, p_aux_real, p_aux_fake = [], [], [], []
    for dn in discs[: k - 1]:
        if len(X_real):
            c_r, phi_r = discriminator_forward(dn, X_real, y_real)
            p_real.append(c_r)
            p_aux_real.append(truth_probability(phi_r, y_real))
        if len(X_fake_adv):
            c_f, _ = discriminator_forward(dn, X_fake_adv, y_fake_adv)
            p_fake.append(1.0 - c_f)
        if len(X_fake_aux):
            _, phi_f = discriminator_forward(dn, X_fake_aux, y_fake_aux)
            p_aux_fake.append(truth_probability(phi_f, y_fake_aux))
    return ModulatingContext(
        k=k,
        p_real=_mean_or_none(p_real),
        p_fake=_mean_or_none(p_fake),
        p_aux_real=_mean_or_none(p_aux_real),
        p_aux_fake=_mean_or_none(p_aux_fake),
    )


def generator_contexts(adv_probs: list[np.ndarray], truth_probs: list[np.ndarray]):
    """Per-member contexts for the generator loss.

    adv_probs[j] holds C_j(fake) and truth_probs[j] the probability member
    j's auxiliary head assigns to the fake labels, for all m members on one
    fake batch.  The k-th context averages entries 0..k-2.
    """
    m = len(adv_probs)
    out = []
    for k in range(1, m + 1):
        out.append(ModulatingContext(
            k=k,
            p_gen=_mean_or_none(adv_probs[: k - 1]),
            p_aux_fake=_mean_or_none(truth_probs[: k - 1]),
        ))
    return out


def gen_total_loss(model: EnsembleModel, X_fake, y_fake) -> float:
    """Overall generator loss: sum over members of adversarial + auxiliary
    terms, each weighted by that member's predecessor context."""
    adv, truth = [], []
    for dn in model.discriminators:
        c, phi = discriminator_forward(dn, X_fake, y_fake)
        adv.append(c)
        truth.append(truth_probability(phi, y_fake))
    total = 0.0
    for k, ctx in enumerate(generator_contexts(adv, truth), start=1):
        total += gen_adversarial_loss(adv[k - 1], ctx)[0]
        total += gen_auxiliary_loss(_phi_from_truth(truth[k - 1], y_fake), y_fake, ctx)[0]
    return total


def _phi_from_truth(p_true: np.ndarray, labels) -> np.ndarray:
    """Invert truth_probability so shared code paths can reuse stored values."""
    lab = np.asarray(labels).reshape(-1, 1)
    return np.where(lab == 1, p_true, 1.0 - p_true)
