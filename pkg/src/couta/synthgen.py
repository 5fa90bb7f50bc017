"""Synthetic multivariate series with planted, labelled anomalies.

Base signal per dimension: ``amplitude * sin(2*pi*t / period + phase)`` plus
Gaussian noise. Planted anomaly types:

``global``      spike 5 noise standard deviations beyond the signal range
``contextual``  offset of 3x the local standard deviation, kept inside the range
``seasonal``    segment played at 3x the base frequency
``shapelet``    segment replaced by a square wave of equal amplitude

Three presets mirror the usual generalisation study: ``point``, ``pattern``
and ``variable`` (pattern anomalies of different lengths).
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import TimeSeriesDataset

ANOMALY_TYPES = ("global", "contextual", "seasonal", "shapelet")
SPIKE_SIGMAS = 5.0
CONTEXT_STDS = 3.0
CONTEXT_HALF_WIDTH = 10
SEASONAL_FACTOR = 3.0


@dataclass(frozen=True)
class PlantedAnomaly:
    type: str
    position: int
    length: int = 1
    dims: tuple[int, ...] | None = None  # None -> every dimension

    def __post_init__(self):
        if self.type not in ANOMALY_TYPES:
            raise ValueError(f"unknown anomaly type {self.type!r}; expected one of {ANOMALY_TYPES}")
        if self.length < 1:
            raise ValueError("anomaly length must be >= 1")
        if self.type in ("global", "contextual") and self.length != 1:
            raise ValueError(f"{self.type} anomalies are single points (length 1)")

    @property
    def stop(self) -> int:
        return self.position + self.length


@dataclass(frozen=True)
class SynthSpec:
    length: int = 1000
    dims: int = 2
    train_fraction: float = 0.4
    periods: tuple[float, ...] = (50.0, 32.0)
    amplitude: float = 1.0
    phases: tuple[float, ...] = (0.0, 1.0)
    noise: float = 0.05
    anomalies: tuple[PlantedAnomaly, ...] = ()

    @property
    def n_train(self) -> int:
        return int(round(self.length * self.train_fraction))

    def validate(self) -> None:
        if self.length < 2 or self.dims < 1:
            raise ValueError("length must be >= 2 and dims >= 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")
        spans = sorted((a.position, a.stop, a) for a in self.anomalies)
        for lo, hi, a in spans:
            if lo < self.n_train or hi > self.length:
                raise ValueError(f"anomaly {a} must lie inside the test region "
                                 f"[{self.n_train}, {self.length})")
            if a.dims is not None and any(not 0 <= k < self.dims for k in a.dims):
                raise ValueError(f"anomaly {a} names a dimension outside 0..{self.dims - 1}")
        for (_, hi, a), (lo, _, b) in zip(spans, spans[1:]):
            if lo < hi:
                raise ValueError(f"anomalies overlap: {a} and {b}")

    def _per_dim(self, values: tuple[float, ...]) -> np.ndarray:
        return np.resize(np.asarray(values, dtype=np.float64), self.dims)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["anomalies"] = [dataclasses.asdict(a) for a in self.anomalies]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        d["anomalies"] = tuple(
            PlantedAnomaly(a["type"], a["position"], a.get("length", 1),
                           None if a.get("dims") is None else tuple(a["dims"]))
            for a in d.get("anomalies", ()))
        for k in ("periods", "phases"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def _plan(*items) -> tuple[PlantedAnomaly, ...]:
    return tuple(PlantedAnomaly(*it) for it in items)


PRESETS: dict[str, tuple[PlantedAnomaly, ...]] = {
    "point": _plan(
        ("global", 480, 1, (0,)), ("contextual", 545, 1, (1,)),
        ("global", 610, 1, (1,)), ("contextual", 690, 1, (0,)),
        ("global", 765, 1, (0, 1)), ("contextual", 840, 1, (0,)),
        ("global", 905, 1, (1,)), ("contextual", 960, 1, (1,)),
    ),
    "pattern": _plan(
        ("seasonal", 480, 30), ("shapelet", 600, 30, (0,)),
        ("seasonal", 730, 30, (1,)), ("shapelet", 860, 30),
    ),
    "variable": _plan(
        ("seasonal", 470, 10), ("shapelet", 540, 60, (1,)),
        ("seasonal", 670, 25, (0,)), ("shapelet", 760, 15),
        ("seasonal", 850, 80),
    ),
}


def preset(name: str, **overrides) -> SynthSpec:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    return SynthSpec(anomalies=PRESETS[name], **overrides)


def base_signal(spec: SynthSpec, t: np.ndarray, freq_factor: float = 1.0) -> np.ndarray:
    periods, phases = spec._per_dim(spec.periods), spec._per_dim(spec.phases)
    return spec.amplitude * np.sin(2 * np.pi * freq_factor * t[:, None] / periods + phases)


def generate(spec: SynthSpec, rng: np.random.Generator | None = None,
             return_clean: bool = False):
    """Return ``(train, test)``; the test split carries labels.

    With ``return_clean`` a third element holds the noiseless base signal
    over the whole series.
    """
    spec.validate()
    rng = np.random.default_rng() if rng is None else rng
    t = np.arange(spec.length, dtype=np.float64)
    clean = base_signal(spec, t)
    values = clean.copy()
    labels = np.zeros(spec.length, dtype=np.int64)
    sigma = spec.noise
    hi, lo = clean.max(axis=0), clean.min(axis=0)
    for a in spec.anomalies:
        dims = list(range(spec.dims)) if a.dims is None else list(a.dims)
        seg = slice(a.position, a.stop)
        if a.type == "global":
            for k in dims:
                # beyond the range on the side opposite the current level
                values[a.position, k] = (hi[k] + SPIKE_SIGMAS * sigma) if clean[a.position, k] < 0 \
                    else (lo[k] - SPIKE_SIGMAS * sigma)
        elif a.type == "contextual":
            ctx = slice(max(0, a.position - CONTEXT_HALF_WIDTH), a.position + CONTEXT_HALF_WIDTH + 1)
            for k in dims:
                local = clean[ctx, k]
                # push away from the local level, towards the opposite side of the range
                direction = -1.0 if clean[a.position, k] >= local.mean() else 1.0
                v = clean[a.position, k] + direction * CONTEXT_STDS * local.std()
                values[a.position, k] = np.clip(v, lo[k], hi[k])
        elif a.type == "seasonal":
            fast = base_signal(spec, t[seg], SEASONAL_FACTOR)
            values[seg, dims] = fast[:, dims]
        else:  # shapelet
            sq = spec.amplitude * np.sign(base_signal(spec, t[seg]))
            sq[sq == 0] = spec.amplitude
            values[seg, dims] = sq[:, dims]
        labels[seg] = 1
    values = values + rng.normal(0.0, spec.noise, size=values.shape)
    cols = tuple(f"x{k}" for k in range(spec.dims))
    n_tr = spec.n_train
    train = TimeSeriesDataset(values[:n_tr], None, "train", cols, 0)
    test = TimeSeriesDataset(values[n_tr:], labels[n_tr:], "test", cols, n_tr)
    if return_clean:
        return train, test, clean
    return train, test


# -------------------------------------------------------------- contamination


def _squarify(x: np.ndarray, center: float, half: float) -> np.ndarray:
    s = np.sign(x - center)
    s[s == 0] = 1.0
    return center + half * s


def _speed_up(series: np.ndarray, start: int, length: int) -> np.ndarray:
    """Replay the series from ``start`` at SEASONAL_FACTOR x speed (wrapping at the end)."""
    n = len(series)
    pos = start + SEASONAL_FACTOR * np.arange(length)
    return np.interp(pos % (n - 1), np.arange(n), series)


def contaminate_train(train: TimeSeriesDataset, ratio: float,
                      rng: np.random.Generator | None = None,
                      kinds: tuple[str, ...] = ("seasonal", "shapelet"),
                      segment_length: int = 20) -> tuple[TimeSeriesDataset, np.ndarray]:
    """Hide anomalous segments in a training series.

    About ``ratio * N`` timestamps (rounded to whole segments) are replaced
    by non-overlapping anomalous segments of the given kinds. The returned
    mask marks them; it is for diagnostics only.
    """
    if not 0 <= ratio < 0.5:
        raise ValueError(f"contamination ratio must be in [0, 0.5), got {ratio}")
    for k in kinds:
        if k not in ANOMALY_TYPES:
            raise ValueError(f"unknown contamination kind {k!r}")
    rng = np.random.default_rng() if rng is None else rng
    x = train.observations.copy()
    n, d = x.shape
    mask = np.zeros(n, dtype=bool)
    seg_len = 1 if set(kinds) <= {"global", "contextual"} else segment_length
    if ratio == 0:
        return train, mask
    n_seg = int(round(ratio * n / seg_len))
    if n_seg == 0:
        raise ValueError(f"ratio {ratio} rounds to zero segments of length {seg_len} "
                         f"on {n} timestamps")
    free = n - n_seg * seg_len
    if free < 0:
        raise ValueError(f"ratio {ratio} needs {n_seg} segments of {seg_len}, "
                         f"which do not fit in {n} timestamps")
    gaps = np.sort(rng.integers(0, free + 1, size=n_seg))
    starts = gaps + seg_len * np.arange(n_seg)
    hi, lo = x.max(axis=0), x.min(axis=0)
    center, half = (hi + lo) / 2, (hi - lo) / 2
    sigma = x.std(axis=0)
    for s in starts:
        kind = kinds[int(rng.integers(len(kinds)))]
        seg = slice(s, s + seg_len)
        for k in range(d):
            col = train.observations[:, k]
            if kind == "shapelet":
                x[seg, k] = _squarify(col[seg], center[k], half[k])
            elif kind == "seasonal":
                x[seg, k] = _speed_up(col, s, seg_len)
            elif kind == "global":
                x[seg, k] = hi[k] + SPIKE_SIGMAS * sigma[k] if rng.random() < 0.5 \
                    else lo[k] - SPIKE_SIGMAS * sigma[k]
            else:
                ctx = col[max(0, s - CONTEXT_HALF_WIDTH):s + CONTEXT_HALF_WIDTH + 1]
                direction = -1.0 if col[s] >= ctx.mean() else 1.0
                x[seg, k] = np.clip(col[s] + direction * CONTEXT_STDS * ctx.std(), lo[k], hi[k])
        mask[seg] = True
    return dataclasses.replace(train, observations=x), mask


def write_dataset(out_dir, spec: SynthSpec, train: TimeSeriesDataset, test: TimeSeriesDataset,
                  seed: int | None = None) -> dict[str, Path]:
    """Write train.csv, test.csv and a JSON ground-truth plan into ``out_dir``."""
    from .data import save_csv

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"train": out / "train.csv", "test": out / "test.csv", "truth": out / "truth.json"}
    save_csv(train, paths["train"])
    save_csv(test, paths["test"])
    truth = {"spec": spec.to_dict(), "seed": seed, "test_start": test.start,
             "anomalous_timestamps": (np.flatnonzero(test.labels) + test.start).tolist()}
    paths["truth"].write_text(json.dumps(truth, indent=1) + "\n")
    return paths
