"""Calibrated one-class classification for unsupervised time-series anomaly detection.

A small numpy implementation: a causal TCN encoder with twin projection heads
trained on an uncertainty-calibrated hypersphere loss, plus a classification
branch that learns to separate normal windows from perturbed "native"
anomalies. Scoring, point-adjusted evaluation and a synthetic benchmark
generator are included.
"""
from .data import (
    NormalizationStats,
    TimeSeriesDataset,
    WindowSet,
    apply_normalizer,
    fit_normalizer,
    load_csv,
    save_csv,
    slide_windows,
)
from .network import CoutaModel, init_center, init_model, load_model, save_model
from .objective import LossBreakdown, total_loss, umc_term
from .perturbation import DEFAULT_POOL, PerturbationOp, generate_native_anomalies, perturb
from .scoring import EvalReport, auc_pr, best_f1, evaluate, point_adjust, score_series
from .trainer import TrainConfig, TrainReport, train

__version__ = "0.1.0"
