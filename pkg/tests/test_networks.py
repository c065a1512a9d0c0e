import numpy as np
import pytest

from gandetect.networks import (
    NOISE_DIM,
    DiscriminatorNet,
    EnsembleModel,
    GeneratorNet,
    build_ensemble,
    discriminator_forward,
    generator_forward,
    load_checkpoint,
    save_checkpoint,
)
from gandetect.numerics import ShapeError
from gandetect.rng import SeededRng


def test_generator_widths_by_depth():
    rng = SeededRng(0)
    for depth, hidden_layers in [(3, 1), (4, 2), (5, 3)]:
        g = GeneratorNet(5, rng, depth=depth)
        assert g.widths == [NOISE_DIM] + [10] * hidden_layers + [5]
    with pytest.raises(ShapeError):
        GeneratorNet(5, rng, depth=6)
    with pytest.raises(ShapeError):
        GeneratorNet(5, rng, depth=2)


def test_generator_output_shape_and_range():
    rng = SeededRng(1)
    g = GeneratorNet(3, rng)
    Z = rng.normal(size=(4, NOISE_DIM))
    out = generator_forward(g, Z, np.array([0, 1, 0, 1]))
    assert out.shape == (4, 3)
    assert np.all((out > 0) & (out < 1))


def test_generator_deterministic():
    rng = SeededRng(1)
    g = GeneratorNet(3, rng)
    Z = rng.normal(size=(5, NOISE_DIM))
    y = np.array([0, 1, 1, 0, 1])
    assert np.array_equal(generator_forward(g, Z, y), generator_forward(g, Z, y))


def test_generator_label_changes_output():
    rng = SeededRng(2)
    g = GeneratorNet(4, rng)
    Z = rng.normal(size=(6, NOISE_DIM))
    out0 = generator_forward(g, Z, np.zeros(6, dtype=np.int64))
    out1 = generator_forward(g, Z, np.ones(6, dtype=np.int64))
    assert np.any(out0 != out1)


def test_generator_rejects_bad_inputs():
    rng = SeededRng(3)
    g = GeneratorNet(2, rng)
    with pytest.raises(ShapeError):
        generator_forward(g, rng.normal(size=(2, 64)), np.array([0, 1]))
    with pytest.raises(ShapeError):
        generator_forward(g, rng.normal(size=(2, NOISE_DIM)), np.array([0, 2]))


def test_discriminator_zero_weights_give_half():
    rng = SeededRng(4)
    dn = DiscriminatorNet(3, rng, learning_rate=0.02)
    for k in dn.params:
        dn.params[k] = np.zeros_like(dn.params[k])
    X = rng.uniform(size=(5, 3))
    c, phi = discriminator_forward(dn, X, np.zeros(5, dtype=np.int64))
    assert np.all(c == 0.5) and np.all(phi == 0.5)


def test_anomaly_head_ignores_labels():
    rng = SeededRng(5)
    dn = DiscriminatorNet(4, rng, learning_rate=0.02)
    X = rng.uniform(size=(7, 4))
    _, phi0 = discriminator_forward(dn, X, np.zeros(7, dtype=np.int64))
    _, phi1 = discriminator_forward(dn, X, np.ones(7, dtype=np.int64))
    assert np.array_equal(phi0, phi1)


def test_projection_term_sign():
    # with embedding row 0 zeroed, the label-1 vs label-0 logit difference is
    # exactly proj[1] . h, so the probability difference carries its sign
    rng = SeededRng(6)
    dn = DiscriminatorNet(3, rng, learning_rate=0.02)
    dn.params["proj"][0] = 0.0
    X = rng.uniform(size=(20, 3))
    c0, _ = discriminator_forward(dn, X, np.zeros(20, dtype=np.int64))
    c1, _ = discriminator_forward(dn, X, np.ones(20, dtype=np.int64))
    h = np.maximum((X - 0.5) @ dn.params["W1"] + dn.params["b1"], 0)
    h = np.maximum(h @ dn.params["W2"] + dn.params["b2"], 0)
    inner = (h * dn.params["proj"][1]).sum(axis=1)
    diff = (c1 - c0).ravel()
    nonzero = inner != 0
    assert np.all(np.sign(diff[nonzero]) == np.sign(inner[nonzero]))


def test_no_projection_head_is_label_blind():
    rng = SeededRng(7)
    dn = DiscriminatorNet(3, rng, learning_rate=0.02, projection=False)
    X = rng.uniform(size=(6, 3))
    c0, _ = discriminator_forward(dn, X, np.zeros(6, dtype=np.int64))
    c1, _ = discriminator_forward(dn, X, np.ones(6, dtype=np.int64))
    assert np.array_equal(c0, c1)


def test_build_ensemble_rates_in_range():
    model = build_ensemble(5, 10, SeededRng(8), disc_lr_range=(0.01, 0.05))
    rates = [dn.learning_rate for dn in model.discriminators]
    assert len(rates) == 10
    assert all(0.01 <= r <= 0.05 for r in rates)
    assert len(set(rates)) > 1


def test_build_ensemble_single_member():
    model = build_ensemble(3, 1, SeededRng(9))
    assert model.m == 1


def test_build_ensemble_deterministic():
    a = build_ensemble(4, 3, SeededRng(10))
    b = build_ensemble(4, 3, SeededRng(10))
    assert np.array_equal(a.generator.params["W0"], b.generator.params["W0"])
    for da, db in zip(a.discriminators, b.discriminators):
        assert da.learning_rate == db.learning_rate
        for k in da.params:
            assert np.array_equal(da.params[k], db.params[k])


def test_ensemble_validation():
    rng = SeededRng(11)
    with pytest.raises(ShapeError):
        EnsembleModel(GeneratorNet(3, rng), [])
    with pytest.raises(ShapeError):
        EnsembleModel(GeneratorNet(3, rng), [DiscriminatorNet(4, rng, 0.02)])
    with pytest.raises(ShapeError):
        build_ensemble(3, 0, rng)
    with pytest.raises(ShapeError):
        build_ensemble(3, 2, rng, disc_lr_range=(0.0, 0.05))


def test_checkpoint_round_trip_bit_exact(tmp_path):
    model = build_ensemble(3, 4, SeededRng(12))
    path = str(tmp_path / "ckpt.json")
    save_checkpoint(path, model, train_config={"m": 4})
    back, cfg, norm = load_checkpoint(path)
    assert cfg == {"m": 4}
    assert norm is None
    assert back.m == model.m and back.d == model.d
    for k, v in model.generator.params.items():
        assert np.array_equal(back.generator.params[k], v)
    for da, db in zip(model.discriminators, back.discriminators):
        assert da.learning_rate == db.learning_rate
        assert da.projection == db.projection
        for k in da.params:
            assert np.array_equal(da.params[k], db.params[k])


def test_checkpoint_keeps_normalizer(tmp_path):
    from gandetect.data import NormalizerState

    model = build_ensemble(2, 1, SeededRng(13))
    norm = NormalizerState(np.array([0.0, -1.0]), np.array([2.0, 5.0]))
    path = str(tmp_path / "ckpt.json")
    save_checkpoint(path, model, normalizer=norm)
    _, _, back = load_checkpoint(path)
    assert np.array_equal(back.feature_min, norm.feature_min)
    assert np.array_equal(back.feature_max, norm.feature_max)


def test_checkpoint_version_guard(tmp_path):
    import json

    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"format_version": 99}))
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(str(path))
