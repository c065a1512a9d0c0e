import numpy as np
import pytest

from gandetect import autodiff as ad
from gandetect.numerics import ShapeError, grad_check
from gandetect.rng import SeededRng


def to_grads(nodes):
    return [n.grad if n.grad is not None else np.zeros_like(n.value) for n in nodes]


def check_op(build, shapes, seed=0, n_coords=60):
    """Finite-difference check of a scalar loss built from leaf params."""
    rng = SeededRng(seed)
    base = [rng.uniform(-0.9, 0.9, size=s) for s in shapes]

    def loss_fn(params):
        leaves = [ad.leaf(p) for p in params]
        out = build(*leaves)
        seed_grad = np.ones_like(out.value) / out.value.size
        loss = float(np.mean(out.value))
        ad.backward([(out, seed_grad)])
        return loss, to_grads(leaves)

    return grad_check(loss_fn, base, SeededRng(seed + 1), n_coords=n_coords)


def test_affine_gradients():
    X = SeededRng(9).uniform(-1, 1, size=(5, 3))
    err = check_op(lambda W, b: ad.affine(X, W, b), [(3, 4), (1, 4)])
    assert err < 1e-6


def test_affine_chain_through_input():
    err = check_op(lambda X, W, b: ad.affine(X, W, b), [(5, 3), (3, 4), (1, 4)])
    assert err < 1e-6


def test_relu_gradients():
    err = check_op(lambda X: ad.relu(X), [(4, 6)], seed=2)
    assert err < 1e-6


def test_sigmoid_gradients():
    err = check_op(lambda X: ad.sigmoid(X), [(4, 6)], seed=3)
    assert err < 1e-6


def test_mul_and_rowdot_gradients():
    assert check_op(lambda A, B: ad.mul(A, B), [(4, 5), (4, 5)], seed=4) < 1e-6
    assert check_op(lambda A, B: ad.rowdot(A, B), [(4, 5), (4, 5)], seed=5) < 1e-6


def test_add_gradients():
    assert check_op(lambda A, B: ad.add(A, B), [(3, 3), (3, 3)], seed=6) < 1e-6


def test_embedding_gradients():
    labels = np.array([0, 1, 1, 0, 1])
    err = check_op(lambda T: ad.embedding(T, labels), [(2, 7)], seed=7)
    assert err < 1e-6


def test_embedding_accumulates_per_row():
    T = ad.leaf(np.zeros((2, 3)))
    out = ad.embedding(T, np.array([1, 1, 0]))
    ad.backward([(out, np.ones((3, 3)))])
    assert np.array_equal(T.grad, [[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])


def test_constant_operands_get_no_gradient():
    X = np.ones((2, 3))
    W = ad.leaf(np.ones((3, 2)))
    out = ad.affine(X, W, np.zeros((1, 2)))
    ad.backward([(out, np.ones((2, 2)))])
    assert W.grad is not None  # leaf got a gradient
    assert isinstance(out, ad.Node)


def test_plain_arrays_stay_plain():
    out = ad.affine(np.ones((2, 3)), np.ones((3, 2)), np.zeros((1, 2)))
    assert isinstance(out, np.ndarray)


def test_diamond_graph_accumulates():
    # y = a*a uses the same node twice; gradient must be 2a
    a = ad.leaf(np.array([[3.0]]))
    out = ad.mul(a, a)
    ad.backward([(out, np.ones((1, 1)))])
    assert a.grad[0, 0] == pytest.approx(6.0)


def test_multiple_seeded_outputs_sum():
    a = ad.leaf(np.array([[2.0]]))
    out1 = ad.mul(a, np.array([[3.0]]))
    out2 = ad.mul(a, np.array([[5.0]]))
    ad.backward([(out1, np.ones((1, 1))), (out2, np.ones((1, 1)))])
    assert a.grad[0, 0] == pytest.approx(8.0)


def test_shared_subgraph_single_pass():
    # two heads reading one trunk: trunk grads must sum over both seeds
    rng = SeededRng(8)
    W = ad.leaf(rng.uniform(-1, 1, size=(3, 4)))
    X = rng.uniform(-1, 1, size=(5, 3))
    h = ad.relu(ad.affine(X, W, np.zeros((1, 4))))
    w1 = rng.uniform(-1, 1, size=(4, 1))
    w2 = rng.uniform(-1, 1, size=(4, 1))
    o1 = ad.affine(h, w1, np.zeros((1, 1)))
    o2 = ad.affine(h, w2, np.zeros((1, 1)))
    ad.backward([(o1, np.ones((5, 1))), (o2, np.ones((5, 1)))])
    grad_once = W.grad.copy()

    W2 = ad.leaf(W.value)
    h = ad.relu(ad.affine(X, W2, np.zeros((1, 4))))
    o1 = ad.affine(h, w1, np.zeros((1, 1)))
    ad.backward([(o1, np.ones((5, 1)))])
    g1 = W2.grad.copy()
    W3 = ad.leaf(W.value)
    h = ad.relu(ad.affine(X, W3, np.zeros((1, 4))))
    o2 = ad.affine(h, w2, np.zeros((1, 1)))
    ad.backward([(o2, np.ones((5, 1)))])
    assert np.allclose(grad_once, g1 + W3.grad, atol=1e-12)


def test_shape_mismatch_raises():
    with pytest.raises(ShapeError):
        ad.mul(ad.leaf(np.ones((2, 2))), np.ones((3, 2)))
    with pytest.raises(ShapeError):
        ad.backward([(ad.leaf(np.ones((2, 2))), np.ones((1, 1)))])


def test_traced_forward_equals_plain_forward():
    from gandetect.networks import (
        build_ensemble, discriminator_forward, generator_forward, NOISE_DIM,
    )

    rng = SeededRng(10)
    model = build_ensemble(3, 2, rng)
    Z = rng.normal(size=(6, NOISE_DIM))
    y = np.array([0, 1, 0, 1, 0, 1])
    plain = generator_forward(model.generator, Z, y)
    trace = {}
    traced = generator_forward(model.generator, Z, y, trace=trace)
    assert np.array_equal(plain, traced.value)
    assert set(trace) == set(model.generator.params)

    X = rng.uniform(size=(4, 3))
    labels = np.array([1, 0, 1, 0])
    c_plain, phi_plain = discriminator_forward(model.discriminators[0], X, labels)
    trace = {}
    c_tr, phi_tr = discriminator_forward(model.discriminators[0], X, labels, trace=trace)
    assert np.array_equal(c_plain, c_tr.value)
    assert np.array_equal(phi_plain, phi_tr.value)
