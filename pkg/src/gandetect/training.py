"""End-to-end training: generator step, active labeling, sequential
discriminator updates, and best-checkpoint selection by train AUC x Gmean.

Per iteration the loop (a) draws a balanced fake batch, (b) updates the
generator on the summed per-member losses, (c) takes the next slice of the
epoch permutation, scores it with the ensemble and buys labels for the most
uncertain samples, then (d) updates the discriminators in order 1..m, each
with its own learning rate and with modulating factors computed from the
already-updated members before it.  The fake batch from (a) is reused in (d).

Epoch-level metrics are computed on the training set with its full ground
truth; that evaluation drives checkpoint selection only and never touches
the label budget.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .data import Dataset
from .losses import (
    ModulatingContext,
    disc_adversarial_loss,
    disc_auxiliary_loss,
    disc_total_loss,
    discriminator_context,
    gen_adversarial_loss,
    gen_auxiliary_loss,
    generator_contexts,
    truth_probability,
)
from .metrics import auc, gmean
from .networks import (
    NOISE_DIM,
    EnsembleModel,
    build_ensemble,
    discriminator_forward,
    generator_forward,
)
from .numerics import AdamState, adam_update, round_half_up
from .rng import SeededRng, STREAM_TRAIN
from .sampling import (
    LabelOracle,
    SamplingConfig,
    active_select,
    balanced_labels,
    ensemble_score,
    random_select,
)

ABLATIONS = ("none", "no_embedding", "single_disc", "plain_loss", "random_sampling")


class ConfigError(ValueError):
    """Invalid training configuration."""


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss or exhausted label budget)."""


def parse_fake_real(ratio) -> tuple[str, float | None]:
    """Parse a fake:real ratio into ('batch', None), ('fake_only', None) or
    ('scaled', f).

    'batch' (the default) feeds the whole fake mini-batch to the auxiliary
    loss alongside the labeled reals, which is what the training loop's step
    order prescribes.  Explicit ratios rescale the fake count against the
    labeled-real count: 'a:b' strings or bare numbers meaning a:1.  '1:0'
    trains the auxiliary heads on fake data only; '0:1' on real data only.
    """
    if isinstance(ratio, str) and ratio.strip() == "batch":
        return "batch", None
    if isinstance(ratio, (int, float)):
        f = float(ratio)
        if f < 0 or not math.isfinite(f):
            raise ConfigError(f"fake:real ratio must be a finite value >= 0, got {ratio}")
        return "scaled", f
    s = str(ratio).strip()
    if ":" in s:
        a_str, b_str = s.split(":", 1)
        try:
            a, b = float(a_str), float(b_str)
        except ValueError:
            raise ConfigError(f"malformed fake:real ratio {ratio!r}") from None
        if a < 0 or b < 0 or (a == 0 and b == 0):
            raise ConfigError(f"malformed fake:real ratio {ratio!r}")
        if b == 0:
            return "fake_only", None
        return "scaled", a / b
    try:
        return parse_fake_real(float(s))
    except ValueError:
        raise ConfigError(f"malformed fake:real ratio {ratio!r}") from None


@dataclass
class TrainConfig:
    """Hyperparameters; the defaults are the reference configuration."""

    m: int = 10
    epochs: int = 50
    batch_size: int = 128
    rho: float = 0.05
    gen_lr: float = 0.01
    disc_lr_range: tuple[float, float] = (0.01, 0.05)
    fake_real_ratio: str = "batch"
    seed: int = 0
    ablation: str = "none"
    generator_depth: int = 4
    # Fresh contexts recompute each member's modulating factors from the
    # already-updated members within the iteration; the frozen variant uses
    # the iteration's starting parameters for all members.
    fresh_context: bool = True

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.rho <= 1.0:
            raise ConfigError(f"rho must be in (0, 1], got {self.rho}")
        if self.gen_lr <= 0:
            raise ConfigError(f"gen_lr must be positive, got {self.gen_lr}")
        lo, hi = self.disc_lr_range
        if not 0 < lo <= hi:
            raise ConfigError(f"bad discriminator lr range [{lo}, {hi}]")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.generator_depth not in (3, 4, 5):
            raise ConfigError(f"generator_depth must be 3, 4 or 5, got {self.generator_depth}")
        parse_fake_real(self.fake_real_ratio)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["disc_lr_range"] = list(self.disc_lr_range)
        return d


@dataclass
class AblationPlan:
    """Effective component switches after applying the ablation tag."""

    m: int
    projection: bool
    plain_loss: bool
    random_sampling: bool


def apply_ablation(cfg: TrainConfig) -> AblationPlan:
    """Resolve the ablation tag into concrete component settings."""
    if cfg.ablation not in ABLATIONS:
        raise ConfigError(f"unknown ablation tag {cfg.ablation!r}")
    return AblationPlan(
        m=1 if cfg.ablation == "single_disc" else cfg.m,
        projection=cfg.ablation != "no_embedding",
        plain_loss=cfg.ablation == "plain_loss",
        random_sampling=cfg.ablation == "random_sampling",
    )


@dataclass
class TrainHistory:
    """Per-iteration losses plus per-epoch training metrics."""

    epoch: list[int] = field(default_factory=list)
    iteration: list[int] = field(default_factory=list)
    gen_loss: list[float] = field(default_factory=list)
    disc_loss: list[float] = field(default_factory=list)
    revealed_at: list[int] = field(default_factory=list)
    train_auc: list[float] = field(default_factory=list)
    train_gmean: list[float] = field(default_factory=list)
    selection_score: list[float] = field(default_factory=list)
    best_epoch: int = 0
    labels_revealed: int = 0
    # per-iteration sample counts feeding the auxiliary loss (trace fields)
    aux_real_count: int = 0
    aux_fake_count: int = 0

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "iter", "gen_loss", "disc_loss",
                        "train_auc", "train_gmean", "labels_revealed"])
            for i in range(len(self.epoch)):
                e = self.epoch[i]
                w.writerow([
                    e, self.iteration[i],
                    repr(self.gen_loss[i]), repr(self.disc_loss[i]),
                    repr(self.train_auc[e - 1]), repr(self.train_gmean[e - 1]),
                    self.revealed_at[i],
                ])


def generator_loss_with_grads(model: EnsembleModel, Z, y_fake, plain_loss: bool = False,
                              contexts: list[ModulatingContext] | None = None):
    """Total generator loss and gradients w.r.t. the generator parameters.

    Gradients flow through every discriminator into the generator; the
    discriminators' own parameters are treated as constants, as are the
    modulating factors.  Pass precomputed contexts to hold the factors fixed
    (finite-difference checks need this); by default they are built from the
    current predictions.
    """
    trace: dict[str, ad.Node] = {}
    X_fake = generator_forward(model.generator, Z, y_fake, trace=trace)
    adv_nodes, phi_nodes = [], []
    for dn in model.discriminators:
        c, phi = discriminator_forward(dn, X_fake, y_fake)
        adv_nodes.append(c)
        phi_nodes.append(phi)
    adv_vals = [n.value for n in adv_nodes]
    truth_vals = [truth_probability(n.value, y_fake) for n in phi_nodes]
    if contexts is None:
        if plain_loss:
            contexts = [ModulatingContext(k=k) for k in range(1, model.m + 1)]
        else:
            contexts = generator_contexts(adv_vals, truth_vals)
    total = 0.0
    seeds = []
    for k in range(model.m):
        v_adv, g_adv = gen_adversarial_loss(adv_vals[k], contexts[k])
        v_aux, g_aux = gen_auxiliary_loss(phi_nodes[k].value, y_fake, contexts[k])
        total += v_adv + v_aux
        seeds.append((adv_nodes[k], g_adv))
        seeds.append((phi_nodes[k], g_aux))
    ad.backward(seeds)
    grads = {name: (node.grad if node.grad is not None else np.zeros_like(node.value))
             for name, node in trace.items()}
    return total, grads


def discriminator_loss_with_grads(model: EnsembleModel, k: int, X_real, y_real,
                                  X_fake_adv, y_fake_adv, X_fake_aux, y_fake_aux,
                                  aux_use_real: bool = True, plain_loss: bool = False,
                                  context: ModulatingContext | None = None,
                                  context_discs=None):
    """Loss for member k (1-based) and gradients w.r.t. its parameters.

    The adversarial part sees (X_real, X_fake_adv); the auxiliary part sees
    (X_real if aux_use_real else nothing, X_fake_aux).  The context defaults
    to the current parameters of members 1..k-1 (context_discs overrides the
    member list, for frozen-context training).
    """
    dn = model.discriminators[k - 1]
    if context is None:
        if plain_loss:
            context = ModulatingContext(k=k)
        else:
            context = discriminator_context(
                context_discs if context_discs is not None else model.discriminators,
                k, X_real, y_real, X_fake_adv, y_fake_adv, X_fake_aux, y_fake_aux)

    n_r, n_adv, n_aux = len(X_real), len(X_fake_adv), len(X_fake_aux)
    parts = [p for p in (X_real, X_fake_adv, X_fake_aux) if len(p)]
    X_union = np.concatenate(parts) if parts else X_real
    y_union = np.concatenate([y_real, y_fake_adv, y_fake_aux])
    trace: dict[str, ad.Node] = {}
    c_node, phi_node = discriminator_forward(dn, X_union, y_union, trace=trace)
    cv, pv = c_node.value, phi_node.value

    adv_val, g_c_real, g_c_fake = disc_adversarial_loss(
        cv[:n_r], cv[n_r:n_r + n_adv], context)
    phi_aux_real = pv[:n_r] if aux_use_real else pv[:0]
    y_aux_real = y_real if aux_use_real else y_real[:0]
    aux_val, g_p_real, g_p_fake = disc_auxiliary_loss(
        phi_aux_real, y_aux_real, pv[n_r + n_adv:], y_fake_aux, context)

    g_c = np.zeros_like(cv)
    g_c[:n_r] = g_c_real
    g_c[n_r:n_r + n_adv] = g_c_fake
    g_p = np.zeros_like(pv)
    if aux_use_real:
        g_p[:n_r] = g_p_real
    g_p[n_r + n_adv:] = g_p_fake
    ad.backward([(c_node, g_c), (phi_node, g_p)])
    grads = {name: (node.grad if node.grad is not None else np.zeros_like(node.value))
             for name, node in trace.items()}
    return disc_total_loss(adv_val, aux_val), grads


def select_checkpoint(selection_scores, snapshots):
    """The snapshot with the highest selection score; ties go to the earliest."""
    if not snapshots or len(selection_scores) != len(snapshots):
        raise ValueError("need one snapshot per recorded score")
    best = int(np.argmax(selection_scores))  # argmax returns the first maximum
    return snapshots[best]


def train(data: Dataset, cfg: TrainConfig, oracle: LabelOracle | None = None):
    """Run the full training loop; returns (best model, history).

    data is expected to be normalized already.  The oracle defaults to an
    uncapped one over data's own labels.
    """
    plan = apply_ablation(cfg)
    mode, ratio = parse_fake_real(cfg.fake_real_ratio)
    if oracle is None:
        oracle = LabelOracle(data.y)
    if oracle.n != data.n:
        raise ConfigError(f"oracle covers {oracle.n} samples but data has {data.n}")
    if data.anomaly_count == 0 or data.anomaly_count == data.n:
        raise ConfigError("training data must contain both classes")

    rng = SeededRng(cfg.seed, STREAM_TRAIN)
    model = build_ensemble(data.d, plan.m, rng, cfg.disc_lr_range,
                           depth=cfg.generator_depth, projection=plan.projection)
    gen_states = {k: AdamState.for_param(v) for k, v in model.generator.params.items()}
    disc_states = [{k: AdamState.for_param(v) for k, v in dn.params.items()}
                   for dn in model.discriminators]

    n, n_bs = data.n, cfg.batch_size
    iterations = max(1, n // n_bs)
    history = TrainHistory()
    best_score = -np.inf
    best_model = None

    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        for it in range(1, iterations + 1):
            chunk = perm[(it - 1) * n_bs : (it - 1) * n_bs + n_bs]
            scfg = SamplingConfig(cfg.rho, len(chunk))
            n_sel = scfg.select_count

            if mode in ("batch", "fake_only"):
                n_aux_fake = n_bs
            else:
                n_aux_fake = round_half_up(ratio * n_sel)
            n_fake_total = max(n_bs, n_aux_fake)

            # (a) fake batch from the pre-update generator
            Z = rng.normal(size=(n_fake_total, NOISE_DIM))
            y_fake = balanced_labels(n_fake_total)
            X_fake = generator_forward(model.generator, Z, y_fake)

            # (b) generator step on the first n_bs fakes
            gen_loss, gen_grads = generator_loss_with_grads(
                model, Z[:n_bs], y_fake[:n_bs], plain_loss=plan.plain_loss)
            if not math.isfinite(gen_loss):
                raise TrainingError(
                    f"non-finite generator loss {gen_loss} at epoch {epoch} iteration {it}")
            for name, grad in gen_grads.items():
                model.generator.params[name] = adam_update(
                    model.generator.params[name], grad, gen_states[name], cfg.gen_lr)

            # (c) uncertainty-driven labeling of the next real slice
            X_chunk = data.X[chunk]
            scores = ensemble_score(model, X_chunk)
            if plan.random_sampling:
                picked = random_select(len(chunk), n_sel, rng)
            else:
                picked = active_select(scores, scfg)
            sel_idx = chunk[picked]
            try:
                y_sel = oracle.reveal(sel_idx)
            except Exception as exc:
                raise TrainingError(
                    f"label oracle failed at epoch {epoch} iteration {it}: {exc}") from exc
            X_sel = data.X[sel_idx]

            # (d) sequential member updates; the fake batch from (a) is reused
            X_adv, y_adv = X_fake[:n_bs], y_fake[:n_bs]
            X_aux, y_aux = X_fake[:n_aux_fake], y_fake[:n_aux_fake]
            frozen = ([dn.copy() for dn in model.discriminators]
                      if not cfg.fresh_context else None)
            disc_losses = []
            for k in range(1, model.m + 1):
                loss_k, grads_k = discriminator_loss_with_grads(
                    model, k, X_sel, y_sel, X_adv, y_adv, X_aux, y_aux,
                    aux_use_real=(mode != "fake_only"), plain_loss=plan.plain_loss,
                    context_discs=frozen)
                if not math.isfinite(loss_k):
                    raise TrainingError(
                        f"non-finite loss {loss_k} for discriminator {k} "
                        f"at epoch {epoch} iteration {it}")
                dn = model.discriminators[k - 1]
                states = disc_states[k - 1]
                for name, grad in grads_k.items():
                    dn.params[name] = adam_update(dn.params[name], grad, states[name],
                                                  dn.learning_rate)
                disc_losses.append(loss_k)

            history.epoch.append(epoch)
            history.iteration.append(it)
            history.gen_loss.append(gen_loss)
            history.disc_loss.append(float(np.mean(disc_losses)))
            history.revealed_at.append(oracle.labels_revealed)
            history.aux_real_count = 0 if mode == "fake_only" else n_sel
            history.aux_fake_count = n_aux_fake

        # epoch evaluation on the training set (ground truth, no budget cost)
        ep_scores = ensemble_score(model, data.X)
        ep_auc = auc(ep_scores, data.y)
        ep_gmean = gmean((ep_scores > 0.5).astype(np.int64), data.y)
        sel_score = ep_auc * ep_gmean
        history.train_auc.append(ep_auc)
        history.train_gmean.append(ep_gmean)
        history.selection_score.append(sel_score)
        if sel_score > best_score:
            best_score = sel_score
            best_model = model.copy()
            history.best_epoch = epoch

    history.labels_revealed = oracle.labels_revealed
    return best_model, history
