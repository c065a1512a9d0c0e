"""GAN-based supervised anomaly detection with ensemble discriminators and
uncertainty-driven label selection."""

from .data import Dataset, NormalizerState, SynthConfig, load_csv, normalize_fit_apply, save_csv, split, synthesize
from .metrics import MetricsReport, auc, boundary_grid, evaluate, friedman_ranks, gmean, nemenyi_cd, predict
from .networks import DiscriminatorNet, EnsembleModel, GeneratorNet, build_ensemble, load_checkpoint, save_checkpoint
from .rng import SeededRng
from .sampling import LabelOracle, SamplingConfig, active_select, ensemble_score, sample_fake_batch
from .training import TrainConfig, TrainHistory, apply_ablation, select_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Dataset", "NormalizerState", "SynthConfig", "load_csv", "normalize_fit_apply",
    "save_csv", "split", "synthesize",
    "MetricsReport", "auc", "boundary_grid", "evaluate", "friedman_ranks", "gmean",
    "nemenyi_cd", "predict",
    "DiscriminatorNet", "EnsembleModel", "GeneratorNet", "build_ensemble",
    "load_checkpoint", "save_checkpoint",
    "SeededRng",
    "LabelOracle", "SamplingConfig", "active_select", "ensemble_score", "sample_fake_batch",
    "TrainConfig", "TrainHistory", "apply_ablation", "select_checkpoint", "train",
    "__version__",
]
