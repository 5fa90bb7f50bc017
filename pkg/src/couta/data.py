"""Time-series ingestion, min-max normalization and sliding windows."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

CLIP_MARGIN = 4.0


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeriesDataset:
    """An ordered N x D observation matrix with optional per-timestamp labels.

    ``start`` is the global timestamp of the first row, so a test split cut
    from a longer series can still report positions in the original frame.
    """

    observations: np.ndarray
    labels: np.ndarray | None = None
    split: str = "train"
    columns: tuple[str, ...] | None = None
    start: int = 0

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=np.float64)
        if obs.ndim == 1:
            obs = obs[:, None]
        if obs.ndim != 2 or obs.shape[0] < 1 or obs.shape[1] < 1:
            raise DataError(f"observations must be a non-empty N x D matrix, got shape {obs.shape}")
        object.__setattr__(self, "observations", obs)
        if self.labels is not None:
            lab = np.asarray(self.labels).astype(np.int64)
            if lab.shape != (obs.shape[0],):
                raise DataError(f"labels length {lab.shape} does not match N={obs.shape[0]}")
            if not np.isin(lab, (0, 1)).all():
                raise DataError("labels must be binary 0/1")
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def d(self) -> int:
        return self.observations.shape[1]


def load_csv(path, *, label_column: str = "label", require_labels: bool = False,
             split: str = "train") -> TimeSeriesDataset:
    """Read a CSV with a header row, one row per timestamp.

    Every column other than ``label_column`` is treated as a numeric
    dimension. The label column is optional unless ``require_labels``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}: empty file (a header row is required)")
        header = [h.strip() for h in header]
        has_label = label_column in header
        if require_labels and not has_label:
            raise DataError(f"{path}: labels requested but no column named {label_column!r}")
        lab_idx = header.index(label_column) if has_label else None
        feat_idx = [i for i in range(len(header)) if i != lab_idx]
        if not feat_idx:
            raise DataError(f"{path}: no feature columns")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            vals = []
            for i in feat_idx:
                try:
                    vals.append(float(row[i]))
                except ValueError:
                    raise DataError(
                        f"{path}: unparsable value {row[i]!r} at row {lineno}, column {header[i]!r}"
                    ) from None
            rows.append(vals)
            if lab_idx is not None:
                cell = row[lab_idx].strip()
                if cell not in ("0", "1"):
                    raise DataError(f"{path}: label {cell!r} at row {lineno} is not 0/1")
                labels.append(int(cell))
    if not rows:
        raise DataError(f"{path}: no data rows")
    return TimeSeriesDataset(
        np.array(rows, dtype=np.float64),
        np.array(labels) if lab_idx is not None else None,
        split=split,
        columns=tuple(header[i] for i in feat_idx),
    )


def save_csv(ds: TimeSeriesDataset, path, *, label_column: str = "label") -> None:
    cols = ds.columns or tuple(f"x{i}" for i in range(ds.d))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(cols) + ([label_column] if ds.labels is not None else []))
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.observations[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            w.writerow(row)


@dataclass(frozen=True)
class NormalizationStats:
    minimum: np.ndarray
    maximum: np.ndarray

    @property
    def degenerate(self) -> np.ndarray:
        """Boolean mask of constant training dimensions."""
        return self.maximum == self.minimum

    @property
    def d(self) -> int:
        return self.minimum.shape[0]

    def to_dict(self) -> dict:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(np.asarray(d["min"], dtype=np.float64), np.asarray(d["max"], dtype=np.float64))


def fit_normalizer(train: TimeSeriesDataset) -> NormalizationStats:
    obs = train.observations
    return NormalizationStats(obs.min(axis=0), obs.max(axis=0))


def apply_normalizer(ds: TimeSeriesDataset, stats: NormalizationStats,
                     is_test: bool = False) -> TimeSeriesDataset:
    """Map values through (x - min) / (max - min) using training statistics.

    Test data is first clipped to [min - 4, max + 4] in raw units. Constant
    training dimensions map to 0.
    """
    if ds.d != stats.d:
        raise DataError(f"dimensionality mismatch: data has D={ds.d}, stats have D={stats.d}")
    x = ds.observations
    if is_test:
        x = np.clip(x, stats.minimum - CLIP_MARGIN, stats.maximum + CLIP_MARGIN)
    span = stats.maximum - stats.minimum
    deg = stats.degenerate
    out = (x - stats.minimum) / np.where(deg, 1.0, span)
    out[:, deg] = 0.0
    return replace(ds, observations=out)


def invert_normalizer(ds: TimeSeriesDataset, stats: NormalizationStats) -> TimeSeriesDataset:
    """Inverse of the training-split transform (degenerate dims map back to their constant)."""
    span = np.where(stats.degenerate, 0.0, stats.maximum - stats.minimum)
    return replace(ds, observations=ds.observations * span + stats.minimum)


@dataclass
class WindowSet:
    """A stack of l x D sub-sequences.

    ``origins`` holds the 0-based row index of each window's last
    observation. ``provenance`` is ``"original"`` or the perturbation kind,
    and ``base`` points at the source original for perturbed windows (-1
    otherwise).
    """

    windows: np.ndarray
    length: int
    stride: int
    origins: np.ndarray
    provenance: np.ndarray = field(default=None)
    base: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.windows.shape[0]
        if self.provenance is None:
            self.provenance = np.full(n, "original", dtype=object)
        if self.base is None:
            self.base = np.full(n, -1, dtype=np.int64)

    def __len__(self) -> int:
        return self.windows.shape[0]

    @property
    def d(self) -> int:
        return self.windows.shape[2]


def slide_windows(ds: TimeSeriesDataset | np.ndarray, length: int, stride: int = 1) -> WindowSet:
    x = ds.observations if isinstance(ds, TimeSeriesDataset) else np.asarray(ds, dtype=np.float64)
    if length < 1 or stride < 1:
        raise DataError(f"window length and stride must be >= 1, got l={length}, r={stride}")
    n = x.shape[0]
    if n < length:
        raise DataError(f"series of length {n} is shorter than the window length {length}; "
                        f"use a window length <= {n}")
    starts = np.arange(0, n - length + 1, stride)
    view = np.lib.stride_tricks.sliding_window_view(x, length, axis=0)  # (n-l+1, D, l)
    windows = np.ascontiguousarray(view[starts].transpose(0, 2, 1))
    return WindowSet(windows, length, stride, starts + length - 1)
