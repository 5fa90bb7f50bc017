"""Model graph: TCN encoder, twin projection heads, classification head, fixed center.

Encoder
    one residual block: causal conv (k=2, dilation 1) -> LeakyReLU ->
    causal conv (k=2, dilation 2), plus a 1x1 skip projection when the input
    width differs from the hidden width, then ReLU. The representation is the
    channel vector at the final time step.
Heads
    ``psi``      affine -> LeakyReLU -> affine           (H outputs)
    ``psi_alt``  shares the first affine, own final affine (H outputs)
    ``clf``      affine -> LeakyReLU -> affine           (1 output)
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .data import NormalizationStats, WindowSet

FORMAT_TAG = "couta-model/1"
KERNEL_SIZE = 2
DILATIONS = (1, 2)
RECEPTIVE_FIELD = 1 + (KERNEL_SIZE - 1) * sum(DILATIONS)


class ModelError(ValueError):
    pass


class EmbeddingPair(NamedTuple):
    z: np.ndarray
    z_alt: np.ndarray
    clf: np.ndarray


class GraphOutputs(NamedTuple):
    z: ad.Tensor
    z_alt: ad.Tensor
    clf: ad.Tensor


@dataclass
class CoutaModel:
    n_features: int
    window: int
    hidden: int
    rep_dim: int
    params: dict[str, np.ndarray]
    center: np.ndarray | None = None
    normalizer: NormalizationStats | None = None
    # "dual": score with both heads; "single": primary head only (no-UMC variant)
    scoring: str = "dual"
    meta: dict = field(default_factory=dict)

    @property
    def has_skip(self) -> bool:
        return "tcn.skip.w" in self.params

    def set_center(self, c: np.ndarray) -> None:
        if self.center is not None:
            raise ModelError("center is already set and is immutable")
        c = np.array(c, dtype=np.float64)
        if c.shape != (self.rep_dim,):
            raise ModelError(f"center must have shape ({self.rep_dim},), got {c.shape}")
        c.flags.writeable = False
        self.center = c

    def copy(self) -> "CoutaModel":
        m = CoutaModel(self.n_features, self.window, self.hidden, self.rep_dim,
                       {k: v.copy() for k, v in self.params.items()},
                       normalizer=self.normalizer, scoring=self.scoring, meta=dict(self.meta))
        if self.center is not None:
            m.set_center(self.center)
        return m

    def n_parameters(self) -> int:
        return sum(v.size for v in self.params.values())


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_model(n_features: int, window: int, hidden: int = 16, rep_dim: int = 16,
               rng: np.random.Generator | None = None) -> CoutaModel:
    if min(n_features, window, hidden, rep_dim) < 1:
        raise ModelError("n_features, window, hidden and rep_dim must all be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    K = KERNEL_SIZE
    p: dict[str, np.ndarray] = {}

    def conv(name, cin, cout, k):
        p[f"{name}.w"] = _uniform(rng, (cout, cin, k), cin * k)
        p[f"{name}.b"] = np.zeros(cout)

    def lin(name, fin, fout):
        p[f"{name}.w"] = _uniform(rng, (fout, fin), fin)
        p[f"{name}.b"] = np.zeros(fout)

    conv("tcn.conv1", n_features, hidden, K)
    conv("tcn.conv2", hidden, hidden, K)
    if n_features != hidden:
        conv("tcn.skip", n_features, hidden, 1)
    lin("head.l1", hidden, hidden)
    lin("head.out", hidden, rep_dim)
    lin("head.alt", hidden, rep_dim)
    lin("clf.l1", hidden, hidden)
    lin("clf.out", hidden, 1)
    return CoutaModel(n_features, window, hidden, rep_dim, p)


def _check_windows(model: CoutaModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (model.window, model.n_features):
        raise ModelError(f"expected windows of shape (B, {model.window}, {model.n_features}), "
                         f"got {x.shape}")
    return x


def graph(model: CoutaModel, x, leaves: dict[str, ad.Tensor] | None = None,
          heads: tuple[str, ...] = ("z", "z_alt", "clf")) -> GraphOutputs:
    """Differentiable forward pass over a (B, l, D) batch.

    ``leaves`` maps parameter names to tensors (pass ``parameter_leaves``
    to obtain gradients). Heads not named in ``heads`` are returned as None.
    """
    P = leaves if leaves is not None else {k: ad.Tensor(v) for k, v in model.params.items()}
    x = np.asarray(x.value if isinstance(x, ad.Tensor) else x, dtype=np.float64)
    # only the last RECEPTIVE_FIELD steps reach the final-step output; cropping is exact
    x = ad.Tensor(x[:, -RECEPTIVE_FIELD:, :])
    h = ad.leaky_relu(ad.causal_conv1d(x, P["tcn.conv1.w"], P["tcn.conv1.b"], DILATIONS[0]))
    h = ad.causal_conv1d(h, P["tcn.conv2.w"], P["tcn.conv2.b"], DILATIONS[1])
    res = ad.causal_conv1d(x, P["tcn.skip.w"], P["tcn.skip.b"]) if "tcn.skip.w" in P else x
    rep = ad.last_step(ad.relu(h + res))
    z = z_alt = clf = None
    if "z" in heads or "z_alt" in heads:
        a = ad.leaky_relu(ad.affine(rep, P["head.l1.w"], P["head.l1.b"]))
        if "z" in heads:
            z = ad.affine(a, P["head.out.w"], P["head.out.b"])
        if "z_alt" in heads:
            z_alt = ad.affine(a, P["head.alt.w"], P["head.alt.b"])
    if "clf" in heads:
        c = ad.leaky_relu(ad.affine(rep, P["clf.l1.w"], P["clf.l1.b"]))
        clf = ad.affine(c, P["clf.out.w"], P["clf.out.b"])
    return GraphOutputs(z, z_alt, clf)


def parameter_leaves(model: CoutaModel) -> dict[str, ad.Tensor]:
    # Tensors wrap the model's arrays without copying, so in-place optimizer
    # updates are visible to the next forward pass.
    return {k: ad.Tensor(v, requires_grad=True, name=k) for k, v in model.params.items()}


def embed(model: CoutaModel, windows, batch_size: int = 512) -> EmbeddingPair:
    """Inference-mode embeddings for a stack of windows, in chunks."""
    x = windows.windows if isinstance(windows, WindowSet) else windows
    x = _check_windows(model, x)
    zs, zas, cs = [], [], []
    for i in range(0, x.shape[0], batch_size):
        out = graph(model, x[i:i + batch_size])
        zs.append(out.z.value)
        zas.append(out.z_alt.value)
        cs.append(out.clf.value[:, 0])
    return EmbeddingPair(np.concatenate(zs), np.concatenate(zas), np.concatenate(cs))


def encode(model: CoutaModel, window: np.ndarray) -> EmbeddingPair:
    """Embeddings of a single l x D window."""
    e = embed(model, _check_windows(model, window)[:1])
    return EmbeddingPair(e.z[0], e.z_alt[0], float(e.clf[0]))


def init_center(model: CoutaModel, train_windows: WindowSet | np.ndarray) -> np.ndarray:
    """Fix the center at the mean primary-head embedding of the original windows."""
    if isinstance(train_windows, WindowSet):
        x = train_windows.windows[train_windows.provenance == "original"]
    else:
        x = np.asarray(train_windows)
    if len(x) == 0:
        raise ModelError("cannot initialise the center from an empty window set")
    z = embed(model, x).z
    model.set_center(z.mean(axis=0))
    return model.center


def distances(model: CoutaModel, windows) -> tuple[np.ndarray, np.ndarray]:
    """Squared distances of both projection-head embeddings to the center."""
    if model.center is None:
        raise ModelError("center has not been initialised")
    e = embed(model, windows)
    d = ((e.z - model.center) ** 2).sum(axis=1)
    d_alt = ((e.z_alt - model.center) ** 2).sum(axis=1)
    return d, d_alt


# ---------------------------------------------------------------- persistence


def model_to_dict(model: CoutaModel) -> dict:
    return {
        "format": FORMAT_TAG,
        "n_features": model.n_features,
        "window": model.window,
        "hidden": model.hidden,
        "rep_dim": model.rep_dim,
        "scoring": model.scoring,
        "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                   for k, v in sorted(model.params.items())},
        "center": None if model.center is None else model.center.tolist(),
        "normalizer": None if model.normalizer is None else model.normalizer.to_dict(),
        "meta": model.meta,
    }


def model_from_dict(d: dict) -> CoutaModel:
    if d.get("format") != FORMAT_TAG:
        raise ModelError(f"unsupported model format {d.get('format')!r}; expected {FORMAT_TAG!r}")
    params = {k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"])
              for k, v in d["params"].items()}
    model = CoutaModel(d["n_features"], d["window"], d["hidden"], d["rep_dim"], params,
                       normalizer=None if d["normalizer"] is None
                       else NormalizationStats.from_dict(d["normalizer"]),
                       scoring=d.get("scoring", "dual"), meta=d.get("meta", {}))
    if d["center"] is not None:
        model.set_center(np.asarray(d["center"], dtype=np.float64))
    return model


def save_model(model: CoutaModel, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> CoutaModel:
    path = Path(path)
    if not path.exists():
        raise ModelError(f"model file not found: {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: not a valid model file ({exc})") from None
    return model_from_dict(d)
