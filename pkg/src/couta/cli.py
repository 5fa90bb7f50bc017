"""Command-line interface.

Subcommands: ``synth``, ``train``, ``score``, ``eval`` and ``ablate``.

Settings resolve in increasing priority: built-in defaults, a JSON config
file (``--config``), environment variables prefixed ``COUTA_`` (for example
``COUTA_EPOCHS=5``), then command-line flags. Flag names mirror config keys
with dashes (``--batch-size`` <-> ``batch_size``). Relative paths are
resolved against ``--root``. Every run writes the resolved settings to
``config.json`` in its output directory.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import synthgen
from .data import DataError, load_csv
from .network import ModelError, load_model, save_model
from .scoring import EvaluationError, evaluate, score_series, write_curve_csv, write_scores_csv
from .trainer import TrainConfig, train

ENV_PREFIX = "COUTA_"
log = logging.getLogger("couta")

SYNTH_DEFAULTS = {"preset": "pattern", "seed": 0, "length": 1000, "dims": 2,
                  "train_fraction": 0.4, "noise": 0.05, "contamination": 0.0}
ABLATE_DEFAULTS = {"preset": "pattern", "contamination": 0.24, "seeds": [0, 1, 2]}
VARIANTS = ("full", "no-umc", "no-nac", "no-umc-nac")


class ConfigError(Exception):
    pass


def _bool(s: str) -> bool:
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _coerce(value, default):
    if isinstance(default, bool):
        return value if isinstance(value, bool) else _bool(value)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, list):
        if isinstance(value, str):
            return [int(v) for v in value.replace(",", " ").split()]
        return [int(v) for v in value]
    return value


def resolve(defaults: dict, config_path: Path | None, flags: dict) -> dict:
    """Merge defaults < config file < COUTA_* environment < explicit flags."""
    out = dict(defaults)
    if config_path is not None:
        try:
            data = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config file {config_path} must hold a JSON object")
        if "settings" in data and "command" in data:
            # a config.json snapshot written by an earlier run
            data = data["settings"]
        for k, v in data.items():
            if k not in defaults:
                raise ConfigError(f"unknown config key {k!r} in {config_path}")
            out[k] = v
    for k, default in defaults.items():
        env = os.environ.get(ENV_PREFIX + k.upper())
        if env is not None:
            out[k] = env
    for k, v in flags.items():
        if v is not None:
            out[k] = v
    try:
        return {k: _coerce(v, defaults[k]) for k, v in out.items()}
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from None


def _train_defaults() -> dict:
    return TrainConfig().to_dict()


def _add_key_flags(p: argparse.ArgumentParser, defaults: dict) -> None:
    for k, v in defaults.items():
        flag = "--" + k.replace("_", "-")
        if isinstance(v, bool):
            p.add_argument(flag, dest=k, type=_bool, default=None, metavar="BOOL")
        elif isinstance(v, list):
            p.add_argument(flag, dest=k, type=int, nargs="+", default=None)
        else:
            p.add_argument(flag, dest=k, type=type(v), default=None)


def _flags(args: argparse.Namespace, defaults: dict) -> dict:
    return {k: getattr(args, k, None) for k in defaults}


def _path(root: Path, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else root / p


def _out_dir(args) -> Path:
    out = _path(args.root, args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot(out: Path, command: str, settings: dict, **paths) -> None:
    doc = {"command": command, "settings": settings,
           "paths": {k: str(v) for k, v in paths.items()}}
    (out / "config.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# ------------------------------------------------------------------ commands


def _synth_spec(s: dict) -> synthgen.SynthSpec:
    return synthgen.preset(s["preset"], length=s["length"], dims=s["dims"],
                           train_fraction=s["train_fraction"], noise=s["noise"])


def synth_data(s: dict):
    """Generate (train, test, spec) for resolved synth settings, contaminating train if asked."""
    spec = _synth_spec(s)
    rng = np.random.default_rng(s["seed"])
    train_set, test_set = synthgen.generate(spec, rng)
    if s["contamination"] > 0:
        train_set, _ = synthgen.contaminate_train(train_set, s["contamination"], rng)
    return train_set, test_set, spec


def cmd_synth(args) -> int:
    s = resolve(SYNTH_DEFAULTS, args.config, _flags(args, SYNTH_DEFAULTS))
    out = _out_dir(args)
    train_set, test_set, spec = synth_data(s)
    paths = synthgen.write_dataset(out, spec, train_set, test_set, seed=s["seed"])
    _snapshot(out, "synth", s, **paths)
    print(f"wrote {paths['train']} and {paths['test']}")
    return 0


def cmd_train(args) -> int:
    defaults = _train_defaults()
    s = resolve(defaults, args.config, _flags(args, defaults))
    cfg = TrainConfig.from_dict(s)
    out = _out_dir(args)
    train_path = _path(args.root, args.train)
    model, report = train(load_csv(train_path, split="train"), cfg)
    save_model(model, out / "model.json")
    report.save(out / "train_report.json")
    _snapshot(out, "train", cfg.to_dict(), train=train_path, model=out / "model.json")
    last = report.epochs[-1].total if report.epochs else float("nan")
    print(f"trained {cfg.epochs} epochs, final loss {last:.6f}; model at {out / 'model.json'}")
    return 0


def cmd_score(args) -> int:
    model_path = _path(args.root, args.model)
    data_path = _path(args.root, args.data)
    model = load_model(model_path)
    ds = load_csv(data_path, split="test")
    out = _out_dir(args)
    series = score_series(model, ds)
    write_scores_csv(out / "scores.csv", series.scores, start=ds.start)
    _snapshot(out, "score", {}, model=model_path, data=data_path)
    print(f"scored {len(series)} timestamps; wrote {out / 'scores.csv'}")
    return 0


def cmd_eval(args) -> int:
    model_path = _path(args.root, args.model)
    test_path = _path(args.root, args.test)
    model = load_model(model_path)
    ds = load_csv(test_path, require_labels=True, split="test")
    out = _out_dir(args)
    series = score_series(model, ds)
    rep = evaluate(series.scores, ds.labels)
    rep.save(out / "report.json")
    write_scores_csv(out / "scores.csv", rep.raw, rep.adjusted, start=ds.start)
    write_curve_csv(out / "curve.csv", rep.adjusted, ds.labels)
    _snapshot(out, "eval", {}, model=model_path, test=test_path)
    print(json.dumps(rep.as_dict()))
    return 0


def run_ablation(cfg: TrainConfig, synth: dict, seeds, variants=VARIANTS) -> dict[str, dict]:
    """Mean point-adjusted F1 / AUC-PR per variant over seeds on synthetic data."""
    rows = {}
    for v in variants:
        f1s, aps = [], []
        for seed in seeds:
            train_set, test_set, _ = synth_data({**synth, "seed": seed})
            model, _ = train(train_set, dataclasses.replace(cfg.variant(v), seed=seed))
            rep = evaluate(score_series(model, test_set).scores, test_set.labels)
            f1s.append(rep.f1)
            aps.append(rep.auc_pr)
        rows[v] = {"f1": float(np.mean(f1s)), "auc_pr": float(np.mean(aps)),
                   "f1_per_seed": f1s, "auc_pr_per_seed": aps}
    return rows


def cmd_ablate(args) -> int:
    tdef = _train_defaults()
    defaults = {**tdef, **ABLATE_DEFAULTS}
    s = resolve(defaults, args.config, _flags(args, defaults))
    cfg = TrainConfig.from_dict({k: s[k] for k in tdef})
    synth = {**SYNTH_DEFAULTS, "preset": s["preset"], "contamination": s["contamination"]}
    out = _out_dir(args)
    rows = run_ablation(cfg, synth, s["seeds"])
    (out / "ablation.json").write_text(json.dumps(rows, indent=1) + "\n")
    with (out / "ablation.csv").open("w") as fh:
        fh.write("variant,f1,auc_pr\n")
        for v, r in rows.items():
            fh.write(f"{v},{r['f1']!r},{r['auc_pr']!r}\n")
    _snapshot(out, "ablate", s)
    for v, r in rows.items():
        print(f"{v:12s} f1={r['f1']:.4f} auc_pr={r['auc_pr']:.4f}")
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--root", type=Path, default=Path("."),
                        help="base directory for relative paths (default: cwd)")
    common.add_argument("--config", type=Path, default=None, help="JSON config file")
    common.add_argument("--out", default="out", help="output directory (relative to --root)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="couta", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", parents=[common], help="generate a synthetic benchmark")
    _add_key_flags(sp, SYNTH_DEFAULTS)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", parents=[common], help="train a model on a CSV")
    sp.add_argument("--train", required=True, help="training CSV")
    _add_key_flags(sp, _train_defaults())
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("score", parents=[common], help="score a CSV with a trained model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("eval", parents=[common], help="score and evaluate a labelled CSV")
    sp.add_argument("--model", required=True)
    sp.add_argument("--test", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("ablate", parents=[common], help="ablation table on synthetic data")
    _add_key_flags(sp, {**_train_defaults(), **ABLATE_DEFAULTS})
    sp.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"couta {args.command}: config error: {msg}", file=sys.stderr)
        return 2
    except (DataError, ModelError, EvaluationError, ValueError, OSError) as exc:
        print(f"couta {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
