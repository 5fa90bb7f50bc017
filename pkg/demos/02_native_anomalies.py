"""The perturbation pool: what each operator does to a normal window."""
import numpy as np

from couta.data import slide_windows
from couta.perturbation import DEFAULT_POOL, generate_native_anomalies, perturb

rng = np.random.default_rng(1)
t = np.arange(40)
window = np.stack([0.5 + 0.4 * np.sin(t / 4), 0.5 + 0.4 * np.cos(t / 6)], axis=1)
np.set_printoptions(precision=3, suppress=True)

print("last 6 rows of the original window:\n", window[-6:])
for op in DEFAULT_POOL:
    out = perturb(window, op, rng)
    rows = np.flatnonzero((out != window).any(axis=1))
    dims = np.flatnonzero((out != window).any(axis=0))
    print(f"\n{op.kind:10s} gamma={op.gamma:+.1f}: rows {rows.min()}..{rows.max()} changed, dims {dims.tolist()}")
    print(out[-6:])

windows = slide_windows(np.tile(window, (5, 1)), 40)
extra = generate_native_anomalies(windows, beta=0.2, rng=rng)
kinds, counts = np.unique(extra.provenance, return_counts=True)
print(f"\n{len(windows)} originals -> {len(extra)} native anomalies:", dict(zip(kinds.tolist(), counts.tolist())))
