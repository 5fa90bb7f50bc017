"""Minimal tape-based reverse-mode differentiation over float64 arrays.

Only the primitives the model graph needs are provided. Operations record
themselves on the innermost active :class:`Tape`; outside a tape they simply
compute values, which is how inference runs.

Example
-------
>>> w = Tensor([3.0], requires_grad=True)
>>> with Tape():
...     loss = sum_(w * w)
>>> backward(loss)
>>> w.grad
array([6.])
"""
from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

LEAKY_SLOPE = 0.01


class ContractViolation(ValueError):
    """Raised when a primitive receives inputs that break its shape contract."""


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_tape", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._tape: Tape | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(scale(self, -1.0), other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


class _Record:
    __slots__ = ("output", "inputs", "vjp", "op")

    def __init__(self, output: Tensor, inputs: tuple, vjp: Callable, op: str):
        self.output = output
        self.inputs = inputs
        self.vjp = vjp
        self.op = op


_local = threading.local()


def _stack() -> list:
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local.stack


class Tape:
    """Ordered record of primitive applications.

    Creation order is a valid topological order, so the backward pass simply
    walks the records in reverse.
    """

    def __init__(self):
        self.records: list[_Record] = []

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _stack().pop()

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ops(self) -> list[str]:
        return [r.op for r in self.records]


def _active_tape() -> Tape | None:
    stack = _stack()
    return stack[-1] if stack else None


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(op: str, value: np.ndarray, inputs: Sequence[Tensor], vjp: Callable) -> Tensor:
    out = Tensor(value)
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._tape = tape
        tape.records.append(_Record(out, tuple(inputs), vjp, op))
    return out


def _require(cond: bool, op: str, msg: str) -> None:
    if not cond:
        raise ContractViolation(f"{op}: {msg}")


# ---------------------------------------------------------------- elementwise


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    _require(a.shape == b.shape, op, f"shape mismatch {a.shape} vs {b.shape}")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and (b.value.ndim == 0 or a.value.ndim == 0):
        # scalar constant shift
        if a.value.ndim == 0 and b.value.ndim != 0:
            a, b = b, a
        _require(not b.requires_grad, "add", "scalar operand must be a constant")
        return _emit("add", a.value + b.value, (a,), lambda g: (g,))
    _same_shape("add", a, b)
    return _emit("add", a.value + b.value, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and b.value.ndim == 0:
        _require(not b.requires_grad, "sub", "scalar operand must be a constant")
        return _emit("sub", a.value - b.value, (a,), lambda g: (g,))
    _same_shape("sub", a, b)
    return _emit("sub", a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("mul", a, b)
    av, bv = a.value, b.value
    return _emit("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: Tensor, k: float) -> Tensor:
    a = as_tensor(a)
    k = float(k)
    return _emit("scale", a.value * k, (a,), lambda g: (g * k,))


def leaky_relu(a: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    a = as_tensor(a)
    d = np.where(a.value > 0, 1.0, slope)
    return _emit("leaky_relu", a.value * d, (a,), lambda g: (g * d,))


def relu(a: Tensor) -> Tensor:
    a = as_tensor(a)
    d = (a.value > 0).astype(np.float64)
    return _emit("relu", a.value * d, (a,), lambda g: (g * d,))


def exp(a: Tensor) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.value)
    return _emit("exp", out, (a,), lambda g: (g * out,))


def square(a: Tensor) -> Tensor:
    a = as_tensor(a)
    av = a.value
    return _emit("square", av * av, (a,), lambda g: (2.0 * av * g,))


# ----------------------------------------------------------------- reductions


def sum_(a: Tensor) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    return _emit("sum", np.asarray(a.value.sum()), (a,), lambda g: (np.full(shape, g),))


def mean(a: Tensor) -> Tensor:
    a = as_tensor(a)
    shape, n = a.shape, a.value.size
    _require(n > 0, "mean", "empty input")
    return _emit("mean", np.asarray(a.value.mean()), (a,), lambda g: (np.full(shape, g / n),))


def sq_distance(a: Tensor, c: np.ndarray) -> Tensor:
    """Row-wise squared Euclidean distance of ``a`` (B, H) to a fixed vector ``c`` (H,)."""
    a = as_tensor(a)
    c = np.asarray(c, dtype=np.float64)
    _require(a.value.ndim == 2 and c.shape == (a.shape[1],), "sq_distance",
             f"expected (B, H) and (H,), got {a.shape} and {c.shape}")
    diff = a.value - c
    return _emit("sq_distance", (diff * diff).sum(axis=1), (a,),
                 lambda g: (2.0 * diff * g[:, None],))


def norm(a: Tensor) -> Tensor:
    """Row-wise Euclidean norm of a (B, H) tensor. Gradient at the origin is taken as 0."""
    a = as_tensor(a)
    _require(a.value.ndim == 2, "norm", f"expected (B, H), got {a.shape}")
    n = np.sqrt((a.value * a.value).sum(axis=1))
    safe = np.where(n > 0, n, 1.0)
    av = a.value
    return _emit("norm", n, (a,), lambda g: (av * (g / safe * (n > 0))[:, None],))


# -------------------------------------------------------------------- layers


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """``x @ w.T + b`` for x (B, in), w (out, in), b (out,)."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    _require(x.value.ndim == 2 and w.value.ndim == 2 and w.shape[1] == x.shape[1]
             and b.shape == (w.shape[0],), "affine",
             f"x {x.shape}, w {w.shape}, b {b.shape} do not conform")
    xv, wv = x.value, w.value

    def vjp(g):
        return g @ wv, g.T @ xv, g.sum(axis=0)

    return _emit("affine", xv @ wv.T + b.value, (x, w, b), vjp)


def causal_conv1d(x: Tensor, w: Tensor, b: Tensor, dilation: int = 1) -> Tensor:
    """Dilated causal convolution over channels-last input.

    x is (B, L, C_in), w is (C_out, C_in, K), b is (C_out,). The input is
    zero-padded on the left by ``(K - 1) * dilation`` so the output keeps
    length L and position t only sees inputs at positions <= t. Tap ``k``
    multiplies ``x[t - (K - 1 - k) * dilation]``.
    """
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    _require(x.value.ndim == 3 and w.value.ndim == 3 and w.shape[1] == x.shape[2]
             and b.shape == (w.shape[0],), "causal_conv1d",
             f"x {x.shape}, w {w.shape}, b {b.shape} do not conform")
    _require(dilation >= 1, "causal_conv1d", f"dilation must be >= 1, got {dilation}")
    B, L, cin = x.shape
    cout, _, K = w.shape
    pad = (K - 1) * dilation
    xp = np.zeros((B, L + pad, cin))
    xp[:, pad:, :] = x.value
    wv = w.value
    out = np.broadcast_to(b.value, (B, L, cout)).copy()
    for k in range(K):
        out += xp[:, k * dilation:k * dilation + L, :] @ wv[:, :, k].T

    def vjp(g):
        gx = np.zeros_like(xp)
        gw = np.empty_like(wv)
        g2 = g.reshape(-1, cout)
        for k in range(K):
            sl = slice(k * dilation, k * dilation + L)
            gx[:, sl, :] += g @ wv[:, :, k]
            gw[:, :, k] = g2.T @ xp[:, sl, :].reshape(-1, cin)
        return gx[:, pad:, :], gw, g2.sum(axis=0)

    return _emit("causal_conv1d", out, (x, w, b), vjp)


def last_step(x: Tensor) -> Tensor:
    """Select the final time step of a (B, L, C) tensor -> (B, C)."""
    x = as_tensor(x)
    _require(x.value.ndim == 3, "last_step", f"expected (B, L, C), got {x.shape}")
    shape = x.shape

    def vjp(g):
        gx = np.zeros(shape)
        gx[:, -1, :] = g
        return (gx,)

    return _emit("last_step", x.value[:, -1, :].copy(), (x,), vjp)


def rows(x: Tensor, start: int, stop: int) -> Tensor:
    """Slice rows ``start:stop`` along the leading axis."""
    x = as_tensor(x)
    _require(0 <= start <= stop <= x.shape[0], "rows",
             f"slice {start}:{stop} out of range for leading extent {x.shape[0]}")
    shape = x.shape

    def vjp(g):
        gx = np.zeros(shape)
        gx[start:stop] = g
        return (gx,)

    return _emit("rows", x.value[start:stop].copy(), (x,), vjp)


# ------------------------------------------------------------------- backward


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf reachable from ``loss``."""
    if loss.value.size != 1:
        raise ContractViolation(f"backward: loss must be scalar, got shape {loss.shape}")
    tape = loss._tape
    if tape is None:
        raise ContractViolation("backward: loss was not produced on a tape")
    adj: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    leaves: dict[int, Tensor] = {}
    for rec in reversed(tape.records):
        g = adj.pop(id(rec.output), None)
        if g is None:
            continue
        grads = rec.vjp(g)
        for inp, gi in zip(rec.inputs, grads):
            if not inp.requires_grad:
                continue
            key = id(inp)
            adj[key] = adj[key] + gi if key in adj else gi
            if inp._tape is None:
                leaves[key] = inp
    for key, leaf in leaves.items():
        g = adj[key]
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g
