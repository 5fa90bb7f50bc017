"""Reverse-mode gradients on a tape, checked against finite differences.

Builds a tiny model, evaluates the joint loss on a mixed batch of original and
perturbed windows, and compares every parameter gradient with a central
difference estimate.
"""
import numpy as np

from couta import autodiff as ad
from couta.network import init_center, init_model, parameter_leaves
from couta.objective import total_loss

rng = np.random.default_rng(0)
model = init_model(n_features=2, window=8, hidden=4, rep_dim=3, rng=rng)
init_center(model, rng.normal(size=(16, 8, 2)))
originals = rng.normal(size=(4, 8, 2))
perturbed = rng.normal(size=(1, 8, 2))

leaves = parameter_leaves(model)
with ad.Tape() as tape:
    br = total_loss(model, originals, perturbed, alpha=0.1, leaves=leaves)
ad.backward(br.tensor)
print(f"loss {br.total:.6f} (one-class {br.l_umc:.6f}, classifier {br.l_nac:.6f}); "
      f"{len(tape)} ops on the tape")

h = 1e-5
for name, value in model.params.items():
    flat = value.ravel()  # a view, so edits reach the model
    num = np.empty_like(flat)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        hi = total_loss(model, originals, perturbed).total
        flat[i] = old - h
        lo = total_loss(model, originals, perturbed).total
        flat[i] = old
        num[i] = (hi - lo) / (2 * h)
    err = np.abs(num - leaves[name].grad.ravel()).max()
    print(f"{name:14s} max |analytic - numeric| = {err:.2e}")
