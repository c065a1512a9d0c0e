"""Minimal reverse-mode gradients for the fixed op set used by the networks.

This is not a general autodiff system.  It supports exactly the operations
the generator and discriminators are built from: affine maps, ReLU, clamped
sigmoid, embedding lookup, elementwise product, rowwise inner product, and
elementwise addition.  Arguments may be Nodes (gradients flow) or plain
ndarrays (treated as constants); mixing the two is how a network is run with
some parameters frozen, e.g. backpropagating through a discriminator into
the generator without touching the discriminator weights.
"""

from __future__ import annotations

import numpy as np

from .numerics import (
    ShapeError,
    relu_grad,
    sigmoid as _sigmoid_fwd,
    sigmoid_grad_from_output,
)


class Node:
    """One recorded value in the computation.  grad accumulates in backward()."""

    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value: np.ndarray, parents=(), backward=None):
        self.value = value
        self.grad = None
        self._parents = parents
        self._backward = backward

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g


def leaf(value: np.ndarray) -> Node:
    """A trainable leaf; gradients accumulate here."""
    return Node(value)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Node) else x


def _is_node(*args) -> bool:
    return any(isinstance(a, Node) for a in args)


def affine(X, W, b):
    """X @ W + b (b broadcasts over rows)."""
    Xv, Wv, bv = value_of(X), value_of(W), value_of(b)
    if Xv.shape[1] != Wv.shape[0]:
        raise ShapeError(f"affine: X is {Xv.shape} but W is {Wv.shape}")
    out_v = Xv @ Wv + bv
    if not _is_node(X, W, b):
        return out_v

    def backward(g):
        if isinstance(X, Node):
            X.accumulate(g @ Wv.T)
        if isinstance(W, Node):
            W.accumulate(Xv.T @ g)
        if isinstance(b, Node):
            b.accumulate(g.sum(axis=0, keepdims=True))

    return Node(out_v, (X, W, b), backward)


def relu(X):
    Xv = value_of(X)
    out_v = np.maximum(Xv, 0.0)
    if not _is_node(X):
        return out_v

    def backward(g):
        X.accumulate(g * relu_grad(Xv))

    return Node(out_v, (X,), backward)


def sigmoid(X):
    """Clamped logistic; derivative is zero inside the clamped region."""
    out_v = _sigmoid_fwd(value_of(X))
    if not _is_node(X):
        return out_v

    def backward(g):
        X.accumulate(g * sigmoid_grad_from_output(out_v))

    return Node(out_v, (X,), backward)


def embedding(table, labels: np.ndarray):
    """Row lookup: out[i] = table[labels[i]]."""
    Tv = value_of(table)
    out_v = Tv[labels]
    if not _is_node(table):
        return out_v

    def backward(g):
        gt = np.zeros_like(Tv)
        np.add.at(gt, labels, g)
        table.accumulate(gt)

    return Node(out_v, (table,), backward)


def mul(A, B):
    """Elementwise product of equal-shaped operands."""
    Av, Bv = value_of(A), value_of(B)
    if Av.shape != Bv.shape:
        raise ShapeError(f"mul: {Av.shape} vs {Bv.shape}")
    out_v = Av * Bv
    if not _is_node(A, B):
        return out_v

    def backward(g):
        if isinstance(A, Node):
            A.accumulate(g * Bv)
        if isinstance(B, Node):
            B.accumulate(g * Av)

    return Node(out_v, (A, B), backward)


def rowdot(A, B):
    """Per-row inner product, returned as a (batch x 1) column."""
    Av, Bv = value_of(A), value_of(B)
    if Av.shape != Bv.shape:
        raise ShapeError(f"rowdot: {Av.shape} vs {Bv.shape}")
    out_v = np.sum(Av * Bv, axis=1, keepdims=True)
    if not _is_node(A, B):
        return out_v

    def backward(g):
        if isinstance(A, Node):
            A.accumulate(g * Bv)
        if isinstance(B, Node):
            B.accumulate(g * Av)

    return Node(out_v, (A, B), backward)


def add(A, B):
    """Elementwise sum of equal-shaped operands."""
    Av, Bv = value_of(A), value_of(B)
    if Av.shape != Bv.shape:
        raise ShapeError(f"add: {Av.shape} vs {Bv.shape}")
    out_v = Av + Bv
    if not _is_node(A, B):
        return out_v

    def backward(g):
        if isinstance(A, Node):
            A.accumulate(g)
        if isinstance(B, Node):
            B.accumulate(g)

    return Node(out_v, (A, B), backward)


def backward(seeds: list[tuple[Node, np.ndarray]]) -> None:
    """Propagate loss gradients from the seeded outputs to every reachable leaf.

    seeds pairs each output Node with dLoss/dOutput (same shape as the value).
    Multiple outputs may be seeded at once; their contributions sum, which is
    how a loss composed of several network heads is handled.
    """
    order: list[Node] = []
    seen: set[int] = set()
    stack = [(n, False) for n, _ in seeds if isinstance(n, Node)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if isinstance(p, Node) and id(p) not in seen:
                stack.append((p, False))

    for node, g in seeds:
        if node.value.shape != np.shape(g):
            raise ShapeError(f"backward seed {np.shape(g)} vs output {node.value.shape}")
        node.accumulate(np.asarray(g, dtype=np.float64))

    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
