"""Dense-network numerics: matrix ops, activations, Adam, gradient checking.

All numeric state lives in 2-D float64 arrays ("matrices").  64-bit precision
is required: the finite-difference gradient checks at 1e-4 tolerance are not
achievable in float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Sigmoid outputs are clamped into [SIGMOID_CLAMP, 1 - SIGMOID_CLAMP] so every
# log() in the loss formulas stays finite.  The derivative is treated as zero
# wherever the clamp is active.
SIGMOID_CLAMP = 1e-7


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class NumericsError(ValueError):
    """A numeric contract was violated (non-finite values, bad arguments)."""


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves away from zero.

    Used for every count derived from a fraction (split sizes, selection
    counts, anomaly counts) so the convention is uniform package-wide.
    """
    return int(np.floor(x + 0.5)) if x >= 0 else -int(np.floor(-x + 0.5))


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-D float64 array without copying when already one."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def affine_forward(W: np.ndarray, b: np.ndarray, X: np.ndarray) -> np.ndarray:
    """X @ W + b with b broadcast over rows.

    W is (in x out), b is (1 x out), X is (batch x in).
    """
    W, b, X = as_matrix(W), as_matrix(b), as_matrix(X)
    if X.shape[1] != W.shape[0]:
        raise ShapeError(
            f"affine: X is {X.shape} but W is {W.shape} (inner dimensions differ)"
        )
    if b.shape != (1, W.shape[1]):
        raise ShapeError(f"affine: b is {b.shape}, expected (1, {W.shape[1]})")
    return X @ W + b


def relu(X: np.ndarray) -> np.ndarray:
    return np.maximum(X, 0.0)


def relu_grad(X: np.ndarray) -> np.ndarray:
    """Derivative of relu w.r.t. its input; 0 at the kink."""
    return (X > 0.0).astype(np.float64)


def sigmoid(X: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, clamped away from {0, 1}."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty_like(X)
    pos = X >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-X[pos]))
    ex = np.exp(X[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)


def sigmoid_grad_from_output(P: np.ndarray) -> np.ndarray:
    """Derivative p*(1-p), zeroed where the output sits on a clamp boundary."""
    g = P * (1.0 - P)
    inside = (P > SIGMOID_CLAMP) & (P < 1.0 - SIGMOID_CLAMP)
    return np.where(inside, g, 0.0)


def activation(kind: str, X: np.ndarray) -> np.ndarray:
    """Elementwise activation; kind is 'relu' or 'sigmoid'."""
    if kind == "relu":
        return relu(np.asarray(X, dtype=np.float64))
    if kind == "sigmoid":
        return sigmoid(X)
    raise NumericsError(f"unknown activation kind {kind!r}")


def init_layer(fan_in: int, fan_out: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """He-style uniform init: W ~ U[-s, s] with s = sqrt(6 / fan_in), b = 0."""
    if fan_in < 1 or fan_out < 1:
        raise NumericsError(f"layer dims must be >= 1, got ({fan_in}, {fan_out})")
    s = float(np.sqrt(6.0 / fan_in))
    W = rng.uniform(-s, s, size=(fan_in, fan_out))
    b = np.zeros((1, fan_out))
    return W, b


def init_embedding(n_rows: int, width: int, rng) -> np.ndarray:
    """Embedding tables start uniform in [-0.05, 0.05]."""
    return rng.uniform(-0.05, 0.05, size=(n_rows, width))


@dataclass
class AdamState:
    """Per-parameter Adam accumulator.

    beta1/beta2/epsilon are the conventional defaults; only the learning
    rates are treated as tunable in this package.
    """

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_param(cls, param: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(param), np.zeros_like(param))


def adam_update(param: np.ndarray, grad: np.ndarray, state: AdamState, lr: float) -> np.ndarray:
    """One bias-corrected Adam step; returns the updated parameter.

    The state is advanced in place. A non-finite gradient rejects the update.
    """
    if param.shape != grad.shape:
        raise ShapeError(f"adam: param {param.shape} vs grad {grad.shape}")
    if lr <= 0:
        raise NumericsError(f"adam: learning rate must be positive, got {lr}")
    if not np.all(np.isfinite(grad)):
        raise NumericsError(
            f"adam: non-finite gradient (max |g| = {np.max(np.abs(grad))}), update rejected"
        )
    state.step_count += 1
    t = state.step_count
    state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad * grad
    m_hat = state.first_moment / (1.0 - state.beta1 ** t)
    v_hat = state.second_moment / (1.0 - state.beta2 ** t)
    return param - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


def finite_difference_grad(loss_fn, params: list[np.ndarray], coords, h: float = 1e-5) -> list[float]:
    """Central differences of a scalar loss at the given (param, flat) coords.

    loss_fn takes the parameter list and returns the scalar loss; it must be
    deterministic given the parameters.
    """
    out = []
    work = [p.copy() for p in params]
    for pi, fi in coords:
        orig = work[pi].flat[fi]
        work[pi].flat[fi] = orig + h
        f_plus = loss_fn(work)
        work[pi].flat[fi] = orig - h
        f_minus = loss_fn(work)
        work[pi].flat[fi] = orig
        out.append((f_plus - f_minus) / (2.0 * h))
    return out


def grad_check(loss_fn, params: list[np.ndarray], rng, n_coords: int = 60, h: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    loss_fn(params) -> (loss, grads) with grads aligned to params.  A random
    subset of at least min(n_coords, total) coordinates is probed; relative
    error is |a - b| / max(|a|, |b|, 1e-8).
    """
    _, grads = loss_fn(params)
    sizes = [p.size for p in params]
    total = int(np.sum(sizes))
    k = min(max(n_coords, 50), total)
    flat_idx = np.sort(rng.choice(total, k))
    bounds = np.cumsum([0] + sizes)
    coords = []
    for f in flat_idx:
        pi = int(np.searchsorted(bounds, f, side="right") - 1)
        coords.append((pi, int(f - bounds[pi])))

    def value_only(ps):
        return loss_fn(ps)[0]

    numeric = finite_difference_grad(value_only, params, coords, h=h)
    worst = 0.0
    for (pi, fi), num in zip(coords, numeric):
        ana = grads[pi].flat[fi]
        err = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
        worst = max(worst, err)
    return worst
