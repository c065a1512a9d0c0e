"""Command-line experiment harness.

Subcommands: train, eval, synth, sweep, ablate, ratio-sweep, report.  Every
command that produces a delimited report also renders a figure next to it.
Experiment directories are keyed by a hash of the resolved spec, so a re-run
with the same spec lands on identical files and a different spec can never
silently overwrite existing results.

Exit codes: 0 success, 2 usage/config error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys

import numpy as np

from .data import (
    CLUSTER_TYPES,
    DataError,
    Dataset,
    SynthConfig,
    load_csv,
    normalize_fit_apply,
    save_csv,
    split,
    synthesize,
)
from . import figures
from .metrics import (
    MetricError,
    boundary_grid,
    evaluate,
    friedman_ranks,
    nemenyi_cd,
    save_grid_csv,
)
from .networks import load_checkpoint, save_checkpoint
from .sampling import LabelOracle
from .training import (
    ABLATIONS,
    ConfigError,
    TrainConfig,
    TrainingError,
    train,
)

SWEEP_GRIDS = {
    "n_discriminators": list(range(1, 22, 2)),
    "gen_depth": [3, 4, 5],
    "rho": [round(0.05 + 0.10 * i, 2) for i in range(10)],
}
DEFAULT_RATIOS = ["1:0", "0:1", "1:1", "5:1", "10:1", "20:1", "50:1", "100:1"]


class UsageError(ValueError):
    """Bad command-line or config-file input."""


@dataclasses.dataclass
class ExperimentSpec:
    """Everything needed to reproduce an experiment."""

    data_path: str | None = None
    synth: SynthConfig | None = None
    label_col: str | int | None = None
    train_cfg: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    runs: int = 10
    train_fraction: float = 0.6
    stratified: bool = True
    out_dir: str = "out"

    def __post_init__(self):
        if (self.data_path is None) == (self.synth is None):
            raise UsageError("exactly one data source (CSV path or synthetic config) is required")
        if self.runs < 1:
            raise UsageError(f"runs must be >= 1, got {self.runs}")
        if not 0.0 < self.train_fraction < 1.0:
            raise UsageError(f"train_fraction must be in (0, 1), got {self.train_fraction}")

    def to_dict(self) -> dict:
        return {
            "data_path": self.data_path,
            "synth": None if self.synth is None else dataclasses.asdict(self.synth),
            "label_col": self.label_col,
            "train_cfg": self.train_cfg.to_dict(),
            "runs": self.runs,
            "train_fraction": self.train_fraction,
            "stratified": self.stratified,
        }

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:8]

    def load_dataset(self) -> Dataset:
        if self.data_path is not None:
            return load_csv(self.data_path, self.label_col)
        return synthesize(self.synth)


def _prepare_dir(root: str, name: str, spec: ExperimentSpec) -> str:
    """Create the hash-keyed experiment directory, refusing mismatched reuse."""
    path = os.path.join(root, f"{name}-{spec.hash()}")
    spec_file = os.path.join(path, "spec.json")
    payload = json.dumps({"hash": spec.hash(), "spec": spec.to_dict()},
                         sort_keys=True, indent=2)
    if os.path.exists(spec_file):
        with open(spec_file) as fh:
            if fh.read() != payload:
                raise UsageError(
                    f"{path} already holds results for a different spec; "
                    "choose another --out or remove the directory")
    os.makedirs(path, exist_ok=True)
    with open(spec_file, "w") as fh:
        fh.write(payload)
    return path


def execute_run(spec: ExperimentSpec, data: Dataset, run_idx: int):
    """One seeded run: split, normalize, train, evaluate on the held-out part."""
    seed = spec.train_cfg.seed + run_idx
    train_set, test_set = split(data, spec.train_fraction, seed=seed,
                                stratified=spec.stratified)
    train_norm, [test_norm], norm_state = normalize_fit_apply(train_set, test_set)
    cfg = dataclasses.replace(spec.train_cfg, seed=seed)
    oracle = LabelOracle(train_norm.y)
    model, history = train(train_norm, cfg, oracle)
    report = evaluate(model, test_norm.X, test_norm.y)
    metrics = {
        "run": run_idx,
        "seed": seed,
        "auc": report.auc,
        "gmean": report.gmean,
        "tp_rate": report.tp_rate,
        "tn_rate": report.tn_rate,
        "labels_revealed": history.labels_revealed,
        "best_epoch": history.best_epoch,
    }
    return metrics, model, history, norm_state, cfg, train_norm


def _run_many(spec: ExperimentSpec, data: Dataset):
    """Metrics rows for spec.runs independent runs (no artifacts kept)."""
    rows = []
    for r in range(spec.runs):
        metrics, *_ = execute_run(spec, data, r)
        rows.append(metrics)
    return rows


def _mean_row(rows: list[dict]) -> dict:
    keys = ("auc", "gmean", "tp_rate", "tn_rate", "labels_revealed", "best_epoch")
    out = {"run": "mean", "seed": ""}
    for k in keys:
        out[k] = float(np.mean([row[k] for row in rows]))
    return out


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_train(args) -> int:
    spec = build_spec(args)
    data = spec.load_dataset()
    exp_dir = _prepare_dir(spec.out_dir, "exp", spec)
    rows = []
    for r in range(spec.runs):
        metrics, model, history, norm_state, cfg, train_norm = execute_run(spec, data, r)
        run_dir = os.path.join(exp_dir, f"run_{r:03d}")
        os.makedirs(run_dir, exist_ok=True)
        history.to_csv(os.path.join(run_dir, "history.csv"))
        save_checkpoint(os.path.join(run_dir, "checkpoint.json"), model,
                        train_config=cfg.to_dict(), normalizer=norm_state)
        with open(os.path.join(run_dir, "metrics.json"), "w") as fh:
            json.dump(metrics, fh, indent=2, sort_keys=True)
        figures.training_curves(history, os.path.join(run_dir, "curves.png"))
        if data.d == 2:
            lo = train_norm.X.min(axis=0) - 0.1
            hi = train_norm.X.max(axis=0) + 0.1
            grid = boundary_grid(model, (lo[0], hi[0], lo[1], hi[1]), resolution=60)
            save_grid_csv(os.path.join(run_dir, "boundary.csv"), grid)
            figures.boundary_heatmap(grid, os.path.join(run_dir, "boundary.png"),
                                     train_norm.X, train_norm.y)
        rows.append(metrics)
        print(f"run {r}: auc={metrics['auc']:.4f} gmean={metrics['gmean']:.4f} "
              f"labels={metrics['labels_revealed']}")

    header = ["run", "seed", "auc", "gmean", "tp_rate", "tn_rate",
              "labels_revealed", "best_epoch"]
    table = [[row[h] for h in header] for row in rows]
    table.append([_mean_row(rows)[h] for h in header])
    _write_csv(os.path.join(exp_dir, "metrics.csv"), header, table)

    aucs = [row["auc"] for row in rows]
    gmeans = [row["gmean"] for row in rows]
    summary = {
        "spec_hash": spec.hash(),
        "runs": spec.runs,
        "auc_mean": float(np.mean(aucs)),
        "auc_std": float(np.std(aucs)),
        "gmean_mean": float(np.mean(gmeans)),
        "gmean_std": float(np.std(gmeans)),
        "per_run": rows,
    }
    with open(os.path.join(exp_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(f"mean auc={summary['auc_mean']:.4f} (+-{summary['auc_std']:.4f}) "
          f"mean gmean={summary['gmean_mean']:.4f} (+-{summary['gmean_std']:.4f})")
    print(f"artifacts in {exp_dir}")
    return 0


def cmd_eval(args) -> int:
    model, _, norm_state = load_checkpoint(args.checkpoint)
    data = load_csv(args.data, _parse_label_col(args.label_col))
    X = norm_state.apply(data.X) if norm_state is not None else data.X
    report = evaluate(model, X, data.y)
    payload = dataclasses.asdict(report)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "eval.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        if model.d == 2:
            lo = X.min(axis=0) - 0.1
            hi = X.max(axis=0) + 0.1
            grid = boundary_grid(model, (lo[0], hi[0], lo[1], hi[1]), resolution=60)
            save_grid_csv(os.path.join(args.out, "boundary.csv"), grid)
            figures.boundary_heatmap(grid, os.path.join(args.out, "boundary.png"),
                                     X, data.y)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_synth(args) -> int:
    cfg = SynthConfig(cluster_type=args.cluster, n=args.n, d=args.d,
                      anomaly_ratio=args.anomaly_ratio, seed=args.seed)
    ds = synthesize(cfg)
    save_csv(ds, args.out)
    print(f"wrote {ds.n} samples ({ds.anomaly_count} anomalies) to {args.out}")
    if ds.d == 2:
        png = os.path.splitext(args.out)[0] + ".png"
        figures.dataset_scatter(ds.X, ds.y, png)
        print(f"scatter plot in {png}")
    return 0


def cmd_sweep(args) -> int:
    spec = build_spec(args)
    if args.parameter not in SWEEP_GRIDS:
        raise UsageError(f"unknown sweep parameter {args.parameter!r}; "
                         f"choose from {sorted(SWEEP_GRIDS)}")
    values = SWEEP_GRIDS[args.parameter]
    data = spec.load_dataset()
    out_dir = _prepare_dir(spec.out_dir, f"sweep-{args.parameter}", spec)
    rows = []
    for v in values:
        if args.parameter == "n_discriminators":
            cfg = dataclasses.replace(spec.train_cfg, m=v)
        elif args.parameter == "gen_depth":
            cfg = dataclasses.replace(spec.train_cfg, generator_depth=v)
        else:
            cfg = dataclasses.replace(spec.train_cfg, rho=v)
        sub = dataclasses.replace(spec, train_cfg=cfg)
        run_rows = _run_many(sub, data)
        mean = _mean_row(run_rows)
        rows.append([v, mean["auc"], mean["gmean"]])
        print(f"{args.parameter}={v}: auc={mean['auc']:.4f} gmean={mean['gmean']:.4f}")
    csv_path = os.path.join(out_dir, "sweep.csv")
    _write_csv(csv_path, [args.parameter, "mean_auc", "mean_gmean"], rows)
    figures.sweep_curve([r[0] for r in rows], [r[1] for r in rows],
                        [r[2] for r in rows], args.parameter,
                        os.path.join(out_dir, "sweep.png"))
    print(f"sweep table in {csv_path}")
    return 0


def cmd_ablate(args) -> int:
    spec = build_spec(args)
    data = spec.load_dataset()
    out_dir = _prepare_dir(spec.out_dir, "ablate", spec)
    order = ["none", "no_embedding", "single_disc", "plain_loss", "random_sampling"]
    means = {}
    for tag in order:
        sub = dataclasses.replace(
            spec, train_cfg=dataclasses.replace(spec.train_cfg, ablation=tag))
        mean = _mean_row(_run_many(sub, data))
        means[tag] = mean
        print(f"{tag}: auc={mean['auc']:.4f} gmean={mean['gmean']:.4f}")
    full_auc = means["none"]["auc"]
    rows = []
    for tag in order:
        note = "factors-forced-to-1" if tag == "plain_loss" else ""
        ok = "" if tag == "none" else str(full_auc >= means[tag]["auc"] - 0.02)
        rows.append([tag, means[tag]["auc"], means[tag]["gmean"], note, ok])
        if ok == "False":
            print(f"warning: full model trails {tag} by more than 0.02 AUC")
    csv_path = os.path.join(out_dir, "ablation.csv")
    _write_csv(csv_path, ["variant", "mean_auc", "mean_gmean", "note", "ordering_ok"], rows)
    figures.ablation_bars(order, [means[t]["auc"] for t in order],
                          [means[t]["gmean"] for t in order],
                          os.path.join(out_dir, "ablation.png"))
    print(f"ablation table in {csv_path}")
    return 0


def cmd_ratio_sweep(args) -> int:
    spec = build_spec(args)
    ratios = [r.strip() for r in args.ratios.split(",")] if args.ratios else DEFAULT_RATIOS
    for r in ratios:
        from .training import parse_fake_real

        parse_fake_real(r)  # validate before any training happens
    data = spec.load_dataset()
    out_dir = _prepare_dir(spec.out_dir, "ratio", spec)
    rows = []
    for r in ratios:
        sub = dataclasses.replace(
            spec, train_cfg=dataclasses.replace(spec.train_cfg, fake_real_ratio=r))
        mean = _mean_row(_run_many(sub, data))
        rows.append([r, mean["auc"], mean["gmean"]])
        print(f"fake:real={r}: auc={mean['auc']:.4f} gmean={mean['gmean']:.4f}")
    csv_path = os.path.join(out_dir, "ratio_sweep.csv")
    _write_csv(csv_path, ["fake_real", "mean_auc", "mean_gmean"], rows)
    figures.sweep_curve(list(range(len(rows))), [r[1] for r in rows],
                        [r[2] for r in rows], "ratio index",
                        os.path.join(out_dir, "ratio_sweep.png"))
    print(f"ratio table in {csv_path}")
    return 0


def cmd_report(args) -> int:
    import csv as _csv

    with open(args.scores, newline="") as fh:
        rows = [r for r in _csv.reader(fh) if r]
    if len(rows) < 3:
        raise UsageError("score matrix needs a header plus at least two dataset rows")
    methods = rows[0][1:]
    datasets = [r[0] for r in rows[1:]]
    try:
        scores = np.array([[float(c) for c in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise UsageError(f"non-numeric score in {args.scores}: {exc}") from None
    table = friedman_ranks(scores, methods)
    cd = nemenyi_cd(len(methods), len(datasets), args.q_alpha)
    os.makedirs(args.out, exist_ok=True)

    rank_rows = [[datasets[i]] + list(table.ranks[i]) for i in range(len(datasets))]
    rank_rows.append(["average"] + list(table.average_ranks))
    _write_csv(os.path.join(args.out, "ranks.csv"), ["dataset"] + methods, rank_rows)
    payload = {
        "methods": methods,
        "average_ranks": table.average_ranks.tolist(),
        "k": len(methods),
        "N": len(datasets),
        "q_alpha": args.q_alpha,
        "critical_difference": cd,
    }
    with open(os.path.join(args.out, "nemenyi.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    figures.cd_diagram(methods, table.average_ranks, cd,
                       os.path.join(args.out, "cd_diagram.png"))
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# Spec assembly: defaults < config file < command-line flags.


def _read_config_file(path: str) -> dict:
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value, got {raw.rstrip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


def _parse_label_col(value):
    if value in (None, "", "last"):
        return None
    try:
        return int(value)
    except ValueError:
        return value


_BOOLS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def build_spec(args) -> ExperimentSpec:
    conf = _read_config_file(args.config) if getattr(args, "config", None) else {}

    def pick(flag_name, conf_key, default, cast=str):
        flag = getattr(args, flag_name, None)
        if flag is not None:
            return flag
        if conf_key in conf:
            raw = conf[conf_key]
            if cast is bool:
                if raw.lower() not in _BOOLS:
                    raise UsageError(f"config {conf_key}: expected a boolean, got {raw!r}")
                return _BOOLS[raw.lower()]
            try:
                return cast(raw)
            except ValueError:
                raise UsageError(f"config {conf_key}: cannot parse {raw!r}") from None
        return default

    data = pick("data", "dataset", None)
    synth_name = pick("synth", "synth", None)
    if data is not None and str(data).startswith("synth:"):
        synth_name, data = str(data)[len("synth:"):], None
    if (data is None) == (synth_name is None):
        raise UsageError("provide exactly one of --data CSV or --synth CLUSTER_TYPE")

    synth_cfg = None
    if synth_name is not None:
        if synth_name not in CLUSTER_TYPES:
            raise UsageError(f"unknown cluster type {synth_name!r}; choose from {CLUSTER_TYPES}")
        try:
            synth_cfg = SynthConfig(
                cluster_type=synth_name,
                n=pick("n", "n", 1000, int),
                d=pick("d", "d", 2, int),
                anomaly_ratio=pick("anomaly_ratio", "anomaly_ratio", 0.10, float),
                seed=pick("synth_seed", "synth_seed", 0, int),
            )
        except DataError as exc:
            raise UsageError(str(exc)) from None
    elif not os.path.exists(data):
        raise UsageError(f"dataset file not found: {data}")

    lr_lo = pick("disc_lr_min", "disc_lr_min", 0.01, float)
    lr_hi = pick("disc_lr_max", "disc_lr_max", 0.05, float)
    try:
        cfg = TrainConfig(
            m=pick("m", "m", 10, int),
            epochs=pick("epochs", "epochs", 50, int),
            batch_size=pick("batch_size", "batch_size", 128, int),
            rho=pick("rho", "rho", 0.05, float),
            gen_lr=pick("gen_lr", "gen_lr", 0.01, float),
            disc_lr_range=(lr_lo, lr_hi),
            fake_real_ratio=pick("fake_real", "fake_real", "1:1"),
            seed=pick("seed", "seed", 0, int),
            ablation=pick("ablation", "ablation", "none"),
            generator_depth=pick("depth", "depth", 4, int),
        )
        return ExperimentSpec(
            data_path=data,
            synth=synth_cfg,
            label_col=_parse_label_col(pick("label_col", "label_col", None)),
            train_cfg=cfg,
            runs=pick("runs", "runs", 10, int),
            train_fraction=pick("train_fraction", "train_fraction", 0.6, float),
            stratified=pick("stratified", "stratified", True, bool),
            out_dir=pick("out", "out", "out"),
        )
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


def _add_spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--data", help="CSV dataset path")
    p.add_argument("--synth", choices=CLUSTER_TYPES, help="use a synthetic dataset")
    p.add_argument("--n", type=int, help="synthetic sample count")
    p.add_argument("--d", type=int, help="synthetic feature dimension")
    p.add_argument("--anomaly-ratio", dest="anomaly_ratio", type=float,
                   help="synthetic anomaly fraction")
    p.add_argument("--synth-seed", dest="synth_seed", type=int,
                   help="seed for the synthetic dataset itself")
    p.add_argument("--label-col", dest="label_col",
                   help="label column name or index (default: last column)")
    p.add_argument("--runs", type=int, help="independent runs to average (default 10)")
    p.add_argument("--train-fraction", dest="train_fraction", type=float,
                   help="training fraction per split (default 0.6)")
    p.add_argument("--stratified", dest="stratified", action="store_true", default=None,
                   help="stratify splits (default)")
    p.add_argument("--no-stratified", dest="stratified", action="store_false",
                   help="plain random splits")
    p.add_argument("--seed", type=int, help="base seed; run r uses seed + r")
    p.add_argument("--m", type=int, help="number of discriminators (default 10)")
    p.add_argument("--epochs", type=int, help="training epochs (default 50)")
    p.add_argument("--batch-size", dest="batch_size", type=int, help="mini-batch size (default 128)")
    p.add_argument("--rho", type=float, help="active sampling ratio (default 0.05)")
    p.add_argument("--gen-lr", dest="gen_lr", type=float, help="generator learning rate")
    p.add_argument("--disc-lr-min", dest="disc_lr_min", type=float)
    p.add_argument("--disc-lr-max", dest="disc_lr_max", type=float)
    p.add_argument("--fake-real", dest="fake_real",
                   help="fake:real ratio for the auxiliary loss, e.g. 1:1, 50:1, 1:0")
    p.add_argument("--ablation", choices=ABLATIONS, help="ablation variant tag")
    p.add_argument("--depth", type=int, help="generator depth 3..5 (default 4)")
    p.add_argument("--out", help="output root directory (default ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gandetect",
        description="GAN-based supervised anomaly detection experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train and evaluate over independent runs")
    _add_spec_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a CSV dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", dest="label_col")
    p.add_argument("--out", help="directory for eval.json and boundary exports")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="emit a synthetic dataset as CSV")
    p.add_argument("--cluster", choices=CLUSTER_TYPES, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--anomaly-ratio", dest="anomaly_ratio", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV file to write")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="sweep one hyperparameter")
    p.add_argument("parameter", choices=sorted(SWEEP_GRIDS))
    _add_spec_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate", help="compare the full model against its variants")
    _add_spec_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("ratio-sweep", help="sweep the fake:real auxiliary ratio")
    p.add_argument("--ratios", help=f"comma-separated list (default {','.join(DEFAULT_RATIOS)})")
    _add_spec_flags(p)
    p.set_defaults(func=cmd_ratio_sweep)

    p = sub.add_parser("report", help="Friedman ranks and Nemenyi critical difference")
    p.add_argument("--scores", required=True,
                   help="CSV: header 'dataset,method1,...', one row per dataset")
    p.add_argument("--q-alpha", dest="q_alpha", type=float, default=3.164,
                   help="studentized range critical value (default 3.164)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (UsageError, ConfigError, DataError, MetricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
