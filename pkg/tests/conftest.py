import sys

import numpy as np
import pytest

from couta import autodiff as ad

FD_STEP = 1e-5


def fd_grad(f, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central finite-difference gradient of a scalar function, perturbing ``x`` in place."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + step
        hi = f()
        x[i] = old - step
        lo = f()
        x[i] = old
        g[i] = (hi - lo) / (2 * step)
    return g


def assert_grad_close(analytic, numeric, abs_tol=1e-6, rel_tol=1e-4):
    tol = np.maximum(abs_tol, rel_tol * np.abs(numeric))
    bad = np.abs(analytic - numeric) > tol
    assert not bad.any(), (
        f"{bad.sum()} entries off; worst abs err {np.abs(analytic - numeric).max():.3e}")


def check_op_gradient(build, inputs: list[np.ndarray], rng, abs_tol=1e-6, rel_tol=1e-4):
    """Compare tape gradients of sum(w * build(*inputs)) with finite differences.

    A fixed random weighting ``w`` turns any output into a scalar without
    masking per-entry errors the way a plain sum could.
    """
    out0 = build(*[ad.Tensor(v) for v in inputs]).value
    w = rng.normal(size=out0.shape)

    def scalar():
        return float((w * build(*[ad.Tensor(v) for v in inputs]).value).sum())

    leaves = [ad.Tensor(v, requires_grad=True) for v in inputs]
    with ad.Tape():
        out = build(*leaves)
        loss = ad.sum_(ad.mul(out, ad.Tensor(w))) if out.value.ndim else ad.scale(out, float(w))
    ad.backward(loss)
    for leaf, v in zip(leaves, inputs):
        assert_grad_close(leaf.grad, fd_grad(scalar, v), abs_tol, rel_tol)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS.values()):
        terminalreporter.write_line(line)
