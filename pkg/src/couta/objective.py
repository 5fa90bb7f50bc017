"""Training objectives and the Adam update.

The uncertainty-calibrated one-class term for a window with squared
distances ``d`` (primary head) and ``d_alt`` (bypass head) is::

    0.5 * exp(-(d - d_alt)**2) * (d + d_alt) + 0.5 * (d - d_alt)**2

Disagreement between the heads damps the distance penalty (soft masking of
contaminated windows) while the second term keeps large disagreement costly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .network import CoutaModel, graph

Y_POS = 1.0
Y_NEG = -1.0
DEFAULT_ALPHA = 0.1


def umc_term(d, d_alt):
    """Closed-form per-window calibrated loss (scalar or elementwise over arrays)."""
    d = np.asarray(d, dtype=np.float64)
    d_alt = np.asarray(d_alt, dtype=np.float64)
    if (d < 0).any() or (d_alt < 0).any():
        raise ad.ContractViolation("umc_term: distances must be non-negative")
    u = (d - d_alt) ** 2
    out = 0.5 * np.exp(-u) * (d + d_alt) + 0.5 * u
    return float(out) if out.ndim == 0 else out


def umc_from_distances(d: ad.Tensor, d_alt: ad.Tensor) -> ad.Tensor:
    """Batch mean of the calibrated term, differentiable in both distances."""
    gap = ad.square(d - d_alt)
    return ad.mean(0.5 * ad.mul(ad.exp(-gap), d + d_alt) + 0.5 * gap)


def _center(model: CoutaModel) -> np.ndarray:
    if model.center is None:
        raise ValueError("model center must be initialised before computing losses")
    return model.center


def _as_batch(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[None] if x.ndim == 2 else x


def umc_loss(model: CoutaModel, originals, leaves=None) -> ad.Tensor:
    x = _as_batch(originals)
    if len(x) == 0:
        raise ValueError("umc_loss: empty batch")
    c = _center(model)
    out = graph(model, x, leaves, heads=("z", "z_alt"))
    return umc_from_distances(ad.sq_distance(out.z, c), ad.sq_distance(out.z_alt, c))


def canonical_loss(model: CoutaModel, originals, leaves=None) -> ad.Tensor:
    """Plain hypersphere loss: mean squared distance of the primary head to the center."""
    x = _as_batch(originals)
    if len(x) == 0:
        raise ValueError("canonical_loss: empty batch")
    out = graph(model, x, leaves, heads=("z",))
    return ad.mean(ad.sq_distance(out.z, _center(model)))


def nac_targets(n_orig: int, n_pert: int) -> np.ndarray:
    return np.concatenate([np.full(n_orig, Y_NEG), np.full(n_pert, Y_POS)])[:, None]


def nac_from_scores(clf: ad.Tensor, n_orig: int, n_pert: int) -> ad.Tensor:
    return ad.mean(ad.square(clf - nac_targets(n_orig, n_pert)))


def nac_loss(model: CoutaModel, originals, perturbed, leaves=None) -> ad.Tensor:
    """Mean squared error of the classification head: originals -> -1, perturbed -> +1."""
    xo, xp = _as_batch(originals), _as_batch(perturbed)
    if len(xo) + len(xp) == 0:
        raise ValueError("nac_loss: both window sets are empty")
    x = np.concatenate([xo, xp]) if len(xo) and len(xp) else (xo if len(xo) else xp)
    out = graph(model, x, leaves, heads=("clf",))
    return nac_from_scores(out.clf, len(xo), len(xp))


@dataclass
class LossBreakdown:
    l_umc: float
    l_nac: float
    total: float
    alpha: float
    n_original: int
    n_perturbed: int
    tensor: ad.Tensor | None = field(default=None, repr=False, compare=False)

    def as_dict(self) -> dict:
        return {"l_umc": self.l_umc, "l_nac": self.l_nac, "total": self.total,
                "alpha": self.alpha, "n_original": self.n_original,
                "n_perturbed": self.n_perturbed}


def total_loss(model: CoutaModel, originals, perturbed=None, alpha: float = DEFAULT_ALPHA,
               leaves=None, use_umc: bool = True) -> LossBreakdown:
    """Joint objective ``l_umc + alpha * l_nac`` from one forward pass over the mixed batch.

    The one-class term covers original windows only; the classification term
    covers originals and perturbed windows. With ``use_umc=False`` the
    one-class term is the canonical hypersphere loss (reported in ``l_umc``).
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    xo = _as_batch(originals)
    xp = _as_batch(perturbed) if perturbed is not None and len(perturbed) else np.empty((0,) + xo.shape[1:])
    n_o, n_p = len(xo), len(xp)
    if n_o == 0:
        raise ValueError("total_loss: the one-class term needs at least one original window")
    c = _center(model)
    x = np.concatenate([xo, xp]) if n_p else xo
    out = graph(model, x, leaves)
    z = ad.rows(out.z, 0, n_o) if n_p else out.z
    d = ad.sq_distance(z, c)
    if use_umc:
        z_alt = ad.rows(out.z_alt, 0, n_o) if n_p else out.z_alt
        one_class = umc_from_distances(d, ad.sq_distance(z_alt, c))
    else:
        one_class = ad.mean(d)
    nac = nac_from_scores(out.clf, n_o, n_p)
    total = one_class + ad.scale(nac, alpha)
    return LossBreakdown(float(one_class.value), float(nac.value), float(total.value),
                         alpha, n_o, n_p, tensor=total)


# ---------------------------------------------------------------------- Adam


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float = 1e-4):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for k, p in params.items():
        g = grads.get(k)
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise ValueError(f"adam_step: gradient for {k!r} has shape {g.shape}, parameter {p.shape}")
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        elif state.m[k].shape != p.shape:
            raise ValueError(f"adam_step: state for {k!r} has shape {state.m[k].shape}, parameter {p.shape}")
        m, v = state.m[k], state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state
