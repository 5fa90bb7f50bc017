"""End-to-end training loop."""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import perturbation
from .data import TimeSeriesDataset, apply_normalizer, fit_normalizer, slide_windows
from .network import CoutaModel, init_center, init_model, parameter_leaves
from .objective import AdamState, LossBreakdown, adam_step, canonical_loss, total_loss, umc_loss

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    window: int = 100
    stride: int = 1
    hidden: int = 16
    rep_dim: int = 16
    alpha: float = 0.1
    beta: float = 0.2
    lr: float = 1e-4
    batch_size: int = 128
    epochs: int = 20
    seed: int = 0
    pool: str = "full"
    regenerate_per_epoch: bool = False
    use_umc: bool = True
    use_nac: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("window", "stride", "hidden", "rep_dim", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.use_nac and self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        perturbation.select_pool(self.pool)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown config key(s): {', '.join(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def variant(self, name: str) -> "TrainConfig":
        """Ablation variants: full, no-umc, no-nac, no-umc-nac."""
        flags = {"full": (True, True), "no-umc": (False, True),
                 "no-nac": (True, False), "no-umc-nac": (False, False)}
        if name not in flags:
            raise ValueError(f"unknown variant {name!r}; expected one of {sorted(flags)}")
        umc, nac = flags[name]
        return dataclasses.replace(self, use_umc=umc, use_nac=nac)


@dataclass
class TrainReport:
    epochs: list[LossBreakdown] = field(default_factory=list)
    # one-class loss over all original windows, measured after each epoch
    epoch_umc_full: list[float] = field(default_factory=list)
    wall_time: float = 0.0
    model: CoutaModel | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"epochs": [e.as_dict() for e in self.epochs],
                "epoch_umc_full": self.epoch_umc_full,
                "wall_time": self.wall_time}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")


def _streams(seed: int):
    init, pert, shuffle = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(init), np.random.default_rng(pert),
            np.random.default_rng(shuffle))


def _mean_breakdown(parts: list[LossBreakdown], alpha: float) -> LossBreakdown:
    w = np.array([p.n_original for p in parts], dtype=np.float64)
    l_umc = float(np.average([p.l_umc for p in parts], weights=w))
    l_nac = float(np.average([p.l_nac for p in parts], weights=w))
    return LossBreakdown(l_umc, l_nac, l_umc + alpha * l_nac, alpha,
                         sum(p.n_original for p in parts), sum(p.n_perturbed for p in parts))


def _full_one_class_loss(model: CoutaModel, x: np.ndarray, use_umc: bool, chunk: int = 1024) -> float:
    fn = umc_loss if use_umc else canonical_loss
    total = 0.0
    for i in range(0, len(x), chunk):
        part = x[i:i + chunk]
        total += float(fn(model, part).value) * len(part)
    return total / len(x)


def train(train_set: TimeSeriesDataset, cfg: TrainConfig | None = None,
          normalize: bool = True) -> tuple[CoutaModel, TrainReport]:
    """Fit a model on (unlabelled) training data.

    With ``normalize`` the training split is min-max scaled and the
    statistics are stored on the returned model for use at inference.
    """
    cfg = cfg or TrainConfig()
    cfg.validate()
    t0 = time.perf_counter()
    rng_init, rng_pert, rng_shuffle = _streams(cfg.seed)

    stats = fit_normalizer(train_set) if normalize else None
    data = apply_normalizer(train_set, stats) if normalize else train_set
    try:
        originals = slide_windows(data, cfg.window, cfg.stride)
    except ValueError as exc:
        raise ValueError(f"cannot window the training set: {exc}") from exc

    model = init_model(data.d, cfg.window, cfg.hidden, cfg.rep_dim, rng_init)
    model.normalizer = stats
    model.scoring = "dual" if cfg.use_umc else "single"
    model.meta = {"train_config": cfg.to_dict()}
    init_center(model, originals)

    alpha = cfg.alpha if cfg.use_nac else 0.0
    pool = perturbation.select_pool(cfg.pool)
    pert = (perturbation.generate_native_anomalies(originals, cfg.beta, pool, rng_pert)
            if cfg.use_nac else None)

    state = AdamState()
    report = TrainReport(model=model)
    x_orig = originals.windows
    n = len(x_orig)
    for epoch in range(cfg.epochs):
        if cfg.use_nac and cfg.regenerate_per_epoch and epoch > 0:
            pert = perturbation.generate_native_anomalies(originals, cfg.beta, pool, rng_pert)
        order = rng_shuffle.permutation(n)
        p_order = rng_shuffle.permutation(len(pert)) if pert is not None else None
        parts = []
        for start in range(0, n, cfg.batch_size):
            stop = min(start + cfg.batch_size, n)
            xb = x_orig[order[start:stop]]
            xp = None
            if p_order is not None:
                # perturbed share per batch follows the global beta ratio, no reuse within an epoch
                lo = min(round(cfg.beta * start), len(p_order))
                hi = len(p_order) if stop == n else min(round(cfg.beta * stop), len(p_order))
                xp = pert.windows[p_order[lo:hi]]
            leaves = parameter_leaves(model)
            with ad.Tape():
                br = total_loss(model, xb, xp, alpha, leaves, use_umc=cfg.use_umc)
            ad.backward(br.tensor)
            adam_step(model.params, {k: t.grad for k, t in leaves.items()}, state, cfg.lr)
            br.tensor = None
            parts.append(br)
        summary = _mean_breakdown(parts, alpha)
        report.epochs.append(summary)
        report.epoch_umc_full.append(_full_one_class_loss(model, x_orig, cfg.use_umc))
        log.debug("epoch %d: total=%.6f umc=%.6f nac=%.6f", epoch + 1,
                  summary.total, summary.l_umc, summary.l_nac)
    report.wall_time = time.perf_counter() - t0
    return model, report
