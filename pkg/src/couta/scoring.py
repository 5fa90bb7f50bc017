"""Inference-time anomaly scores and the point-adjusted evaluation protocol."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import TimeSeriesDataset, apply_normalizer, slide_windows
from .network import CoutaModel, ModelError, embed


class EvaluationError(ValueError):
    pass


@dataclass
class AnomalyScoreSeries:
    scores: np.ndarray
    window: int

    @property
    def padded(self) -> np.ndarray:
        """Mask of the leading positions that received the padding score."""
        mask = np.zeros(len(self.scores), dtype=bool)
        mask[:self.window - 1] = True
        return mask

    def __len__(self) -> int:
        return len(self.scores)


def window_scores(model: CoutaModel, windows) -> np.ndarray:
    """Sum of the (unsquared) center distances of both heads, or the primary head alone."""
    if model.center is None:
        raise ModelError("model center has not been initialised")
    e = embed(model, windows)
    score = np.linalg.norm(e.z - model.center, axis=1)
    if model.scoring == "dual":
        score = score + np.linalg.norm(e.z_alt - model.center, axis=1)
    return score


def score_series(model: CoutaModel, test: TimeSeriesDataset, normalize: bool = True) -> AnomalyScoreSeries:
    """Per-timestamp scores via stride-1 windows; each window scores its last timestamp.

    The first l - 1 timestamps are padded with 0. With ``normalize`` the
    test split is clipped and scaled by the statistics stored on the model.
    """
    if test.n < model.window:
        raise EvaluationError(f"test series of length {test.n} is shorter than the window {model.window}")
    if normalize and model.normalizer is not None:
        test = apply_normalizer(test, model.normalizer, is_test=True)
    ws = slide_windows(test, model.window, 1)
    out = np.zeros(test.n)
    out[ws.origins] = window_scores(model, ws)
    return AnomalyScoreSeries(out, model.window)


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise EvaluationError(f"scores {s.shape} and labels {y.shape} must be equal-length vectors")
    if not np.isin(y, (0, 1)).all():
        raise EvaluationError("labels must be binary")
    return s, y.astype(np.int64)


def point_adjust(scores, labels) -> np.ndarray:
    """Raise every score inside a labelled anomaly segment to the segment maximum."""
    s, y = _check(scores, labels)
    out = s.copy()
    edges = np.diff(np.concatenate([[0], y, [0]]))
    for a, b in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
        out[a:b] = s[a:b].max()
    return out


def _sweep(s: np.ndarray, y: np.ndarray):
    """Precision/recall at every distinct score used as threshold (score >= t), descending t."""
    if y.sum() == 0:
        raise EvaluationError("no positive labels: precision/recall are undefined")
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(1 - y_sorted)
    # keep the last index of each run of equal scores
    last = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s_sorted) - 1]
    tp, fp, thr = tp[last], fp[last], s_sorted[last]
    precision = tp / (tp + fp)
    recall = tp / y.sum()
    return thr, precision, recall


def best_f1(scores, labels) -> tuple[float, float, float, float]:
    """Best F1 over observed-score thresholds, returned as (f1, precision, recall, threshold).

    Ties in F1 go to the higher threshold.
    """
    s, y = _check(scores, labels)
    thr, p, r = _sweep(s, y)
    denom = p + r
    f1 = np.where(denom > 0, 2 * p * r / np.where(denom > 0, denom, 1.0), 0.0)
    i = int(np.argmax(f1))  # thresholds are descending, so the first max has the higher threshold
    return float(f1[i]), float(p[i]), float(r[i]), float(thr[i])


def auc_pr(scores, labels) -> float:
    """Average precision: sum over thresholds of (R_i - R_{i-1}) * P_i."""
    s, y = _check(scores, labels)
    _, p, r = _sweep(s, y)
    return float(np.sum(np.diff(np.r_[0.0, r]) * p))


def pr_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds, precision, recall) in descending-threshold order."""
    s, y = _check(scores, labels)
    return _sweep(s, y)


@dataclass
class EvalReport:
    f1: float
    precision: float
    recall: float
    threshold: float
    auc_pr: float
    adjusted: np.ndarray = field(repr=False)
    raw: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {"f1": self.f1, "precision": self.precision, "recall": self.recall,
                "threshold": self.threshold, "auc_pr": self.auc_pr}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=1) + "\n")


def evaluate(scores, labels, adjust: bool = True) -> EvalReport:
    s, y = _check(scores, labels)
    adj = point_adjust(s, y) if adjust else s
    f1, p, r, t = best_f1(adj, y)
    return EvalReport(f1, p, r, t, auc_pr(adj, y), adj, s)


def write_scores_csv(path, raw, adjusted=None, start: int = 0) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "score"] + (["adjusted_score"] if adjusted is not None else []))
        for i, v in enumerate(raw):
            row = [start + i, repr(float(v))]
            if adjusted is not None:
                row.append(repr(float(adjusted[i])))
            w.writerow(row)


def write_curve_csv(path, scores, labels) -> None:
    """Threshold sweep (threshold, precision, recall, f1) for external plotting."""
    thr, p, r = pr_curve(scores, labels)
    denom = np.where(p + r > 0, p + r, 1.0)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "precision", "recall", "f1"])
        for row in zip(thr, p, r, 2 * p * r / denom):
            w.writerow([repr(float(v)) for v in row])
