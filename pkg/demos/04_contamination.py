"""Contaminated training data: the four ablation variants side by side."""
from couta.cli import SYNTH_DEFAULTS, run_ablation
from couta.trainer import TrainConfig

cfg = TrainConfig(window=50, epochs=40, lr=1e-3)
print("contamination  " + "  ".join(f"{v:>10s}" for v in ("full", "no-umc", "no-nac", "no-umc-nac")))
for ratio in (0.0, 0.12, 0.24):
    rows = run_ablation(cfg, {**SYNTH_DEFAULTS, "contamination": ratio}, seeds=[0, 1])
    print(f"{ratio:12.0%}   " + "  ".join(f"{r['f1']:10.3f}" for r in rows.values()))
