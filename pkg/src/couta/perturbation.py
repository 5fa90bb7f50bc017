"""Native anomaly generation by perturbing the tail of normal windows.

Three operator kinds are supported:

``point``
    selected dimensions of the last observation are replaced by ``gamma``.
``contextual``
    selected dimensions of the last observation become the mean of the
    previous ``k`` values plus ``gamma``.
``collective``
    the last ``m`` rows (``m`` uniform in ``[1, w]``) of selected dimensions
    are replaced by ``gamma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import WindowSet

KINDS = ("point", "contextual", "collective")


@dataclass(frozen=True)
class PerturbationOp:
    kind: str
    gamma: float
    k: int = 10
    w: int | None = None  # None -> max(1, floor(l / 2)) at application time

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}; expected one of {KINDS}")

    def segment_cap(self, length: int) -> int:
        return self.w if self.w is not None else max(1, length // 2)


DEFAULT_POOL: tuple[PerturbationOp, ...] = (
    PerturbationOp("point", 2.0),
    PerturbationOp("point", -2.0),
    PerturbationOp("contextual", 0.5),
    PerturbationOp("contextual", -0.5),
    PerturbationOp("collective", 0.0),
    PerturbationOp("collective", 1.0),
)

POOL_SELECTIONS = ("full", "point-only", "contextual-only", "collective-only")


def select_pool(selection: str = "full") -> tuple[PerturbationOp, ...]:
    if selection == "full":
        return DEFAULT_POOL
    if selection not in POOL_SELECTIONS:
        raise ValueError(f"unknown pool selection {selection!r}; expected one of {POOL_SELECTIONS}")
    kind = selection.split("-")[0]
    return tuple(op for op in DEFAULT_POOL if op.kind == kind)


def choose_dims(d: int, rng: np.random.Generator) -> np.ndarray:
    """A uniformly sized (1..d), uniformly drawn non-empty subset of dimensions."""
    m = int(rng.integers(1, d + 1))
    return np.sort(rng.choice(d, size=m, replace=False))


def perturb(window: np.ndarray, op: PerturbationOp, rng: np.random.Generator,
            dims: np.ndarray | None = None) -> np.ndarray:
    """Apply one perturbation to an l x D window, returning a new array.

    ``dims`` overrides the random dimension choice.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ValueError(f"window must be l x D, got shape {window.shape}")
    length, d = window.shape
    if op.kind != "point" and length < 2:
        raise ValueError(f"{op.kind} perturbation needs window length >= 2, got {length}")
    if dims is None:
        dims = choose_dims(d, rng)
    out = window.copy()
    if op.kind == "point":
        out[-1, dims] = op.gamma
    elif op.kind == "contextual":
        ctx = min(op.k, length - 1)
        out[-1, dims] = window[-1 - ctx:-1, dims].mean(axis=0) + op.gamma
    else:
        m = int(rng.integers(1, op.segment_cap(length) + 1))
        out[length - m:, dims] = op.gamma
    return out


def generate_native_anomalies(originals: WindowSet, beta: float,
                              pool=DEFAULT_POOL, rng: np.random.Generator | None = None) -> WindowSet:
    """Draw ceil(beta * |S|) perturbed windows, base window and op sampled with replacement."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if len(originals) == 0:
        raise ValueError("cannot generate native anomalies from an empty window set")
    pool = tuple(pool)
    if not pool:
        raise ValueError("perturbation pool is empty")
    rng = np.random.default_rng() if rng is None else rng
    count = math.ceil(beta * len(originals) - 1e-9)
    base = rng.integers(0, len(originals), size=count)
    which = rng.integers(0, len(pool), size=count)
    out = np.empty((count,) + originals.windows.shape[1:])
    for i, (b, j) in enumerate(zip(base, which)):
        out[i] = perturb(originals.windows[b], pool[j], rng)
    provenance = np.array([pool[j].kind for j in which], dtype=object)
    return WindowSet(out, originals.length, originals.stride, originals.origins[base],
                     provenance, base.astype(np.int64))
