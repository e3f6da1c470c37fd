"""Command line: ``groupcart {train,evaluate,compare,sweep,synth}``.

Exit status is 0 on success, 2 for configuration or data errors and 3 when
an internal invariant is violated.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import report as report_mod
from .data import apply_min_max, fit_min_max, make_synthetic_biased, split, write_csv
from .ensemble import EnsembleModel, objective_vector
from .ensemble import train as train_ensemble
from .errors import ConfigError, GroupCartError
from .experiment import METHODS, compare, sweep
from .metrics import evaluate
from .moo import d2h


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="experiment config file (key = value with [sections])")
    p.add_argument("--data", help="CSV path, 'german' (bundled) or 'synthetic[:n=..,bias=..,seed=..]'")
    p.add_argument("--synthetic", help="synthetic generator parameters, e.g. 'n=5000 bias=0.4 seed=1'")
    p.add_argument("--target", help="target column")
    p.add_argument("--favorable", help="raw target value that is favorable")
    p.add_argument("--protected", action="append", help="name=privileged:unprivileged (repeatable)")
    p.add_argument("--encoding", action="append", help="column=onehot or column=ordinal:a|b|c (repeatable)")
    p.add_argument("--name", help="dataset label used in report file names")
    p.add_argument("--ensemble-size", type=int, dest="ensemble_size")
    p.add_argument("--mode", choices=("plain", "adaboost"))
    p.add_argument("--domination", choices=("binary", "continuous"))
    p.add_argument("--objectives", help="space-separated objective metrics")
    p.add_argument("--proportions", help="per-protected-attribute share of the fairness weight")
    p.add_argument("--voting", choices=("soft", "hard"))
    p.add_argument("--max-depth", type=int, dest="max_depth")
    p.add_argument("--min-samples-leaf", type=int, dest="min_samples_leaf")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int, help=f"split seed (falls back to ${config_mod.SEED_ENV})")
    p.add_argument("--jobs", type=int, help="repeats run in this many processes")
    p.add_argument("--precision", type=int, help="decimals for percentages")
    p.add_argument("--out", help="output directory")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groupcart", description="Fairness-aware CART ensembles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one ensemble and write a model bundle")
    _common(p)
    p.add_argument("--repeat-index", type=int, dest="repeat_index", help="which split to train on")

    p = sub.add_parser("evaluate", help="evaluate a model bundle")
    _common(p)
    p.add_argument("--model", required=True, help="model bundle directory")

    p = sub.add_parser("compare", help="repeated comparison of methods with Scott-Knott ranks")
    _common(p)
    p.add_argument("methods", nargs="*", help=f"methods among {', '.join(METHODS)} (name@label for aliases)")

    p = sub.add_parser("sweep", help="ensemble-size sweep with the flip-rate stopping rule")
    _common(p)
    p.add_argument("--sizes", nargs="+", type=int)

    p = sub.add_parser("synth", help="write a synthetic biased dataset as CSV")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--bias", type=float, default=0.4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV file to write")
    return parser


def _build(args) -> config_mod.ExperimentConfig:
    file_values = config_mod.read_file(args.config) if getattr(args, "config", None) else {}
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "model")}
    if overrides.get("methods") == []:
        overrides["methods"] = None
    return config_mod.build(file_values, overrides)


def _say(text: str):
    sys.stdout.write(text)
    sys.stdout.flush()


def cmd_train(cfg: config_mod.ExperimentConfig) -> Path:
    data = config_mod.load_dataset(cfg)
    lo, hi = fit_min_max(data)
    scaled = apply_min_max(data, lo, hi)
    train, valid, _ = split(scaled, cfg.plan, cfg.repeat_index)
    model = train_ensemble(train, valid, cfg.ensemble)
    metadata = {
        "data": cfg.declarations(),
        "feature_names": list(data.feature_names),
        "label_values": list(data.label_values),
        "scale_min": [repr(float(v)) for v in lo],
        "scale_max": [repr(float(v)) for v in hi],
        "split": {"seed": cfg.plan.seed, "repeats": cfg.plan.repeats, "repeat_index": cfg.repeat_index},
    }
    out = Path(cfg.out)
    model.save(out, metadata)
    table = report_mod.frontier_csv(model)
    (out / "frontier.csv").write_text(table, encoding="utf-8")
    _say(f"trained {len(model.members)} members ({model.mode}); frontier {list(model.frontier_ids)}\n")
    _say(table)
    return out


def cmd_evaluate(cfg: config_mod.ExperimentConfig, model_dir, args=None) -> tuple:
    model, meta = EnsembleModel.load(model_dir)
    decl = meta.get("data", {})
    if args is not None and args.data is not None:
        # Data given on the command line: use it whole, keeping the bundle's declarations unless overridden.
        base = config_mod.from_declarations(decl)
        base.source = cfg.source
        base.synthetic = cfg.synthetic
        for attr in ("target", "favorable"):
            if getattr(args, attr) is not None:
                setattr(base, attr, getattr(cfg, attr))
        if args.protected:
            base.protected = cfg.protected
        if args.encoding:
            base.encodings = cfg.encodings
        data = config_mod.load_dataset(base)
        where = "given data"
    else:
        base = config_mod.from_declarations(decl)
        data = config_mod.load_dataset(base)
        where = None
    expected = tuple(meta.get("feature_names", model.feature_names))
    if data.feature_names != expected:
        missing = sorted(set(expected) - set(data.feature_names))
        extra = sorted(set(data.feature_names) - set(expected))
        raise ConfigError(f"schema mismatch with the model bundle: missing {missing}, unexpected {extra}")
    lo = np.array([float(v) for v in meta["scale_min"]])
    hi = np.array([float(v) for v in meta["scale_max"]])
    data = apply_min_max(data, lo, hi)
    if where is None:
        s = meta["split"]
        plan = config_mod.SplitPlan(seed=s["seed"], repeats=s["repeats"])
        data = split(data, plan, s["repeat_index"])[2]
        where = f"held-out test split (seed {s['seed']}, repeat {s['repeat_index']})"
    pa_names = list(model.protected)
    rep = evaluate(model, data, pa_names)
    dist = d2h(objective_vector(rep, model.specs, pa_names), model.specs)
    text = f"evaluation on {where}, {data.row_count} rows\n\n" + report_mod.render_metric_report(rep, dist, cfg.precision)
    out = Path(args.out) if args is not None and args.out else Path(model_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "evaluation.txt").write_text(text, encoding="utf-8")
    (out / "evaluation.csv").write_text(report_mod.metric_report_csv(rep, dist), encoding="utf-8")
    _say(text)
    return rep, dist


def cmd_compare(cfg: config_mod.ExperimentConfig):
    data = config_mod.load_dataset(cfg)
    rep = compare(data, cfg.plan, cfg.ensemble, cfg.methods, jobs=cfg.jobs)
    paths = report_mod.write_trial_report(rep, cfg.out, cfg.dataset_name, cfg.precision)
    for pa in rep.protected:
        _say(report_mod.render_trial_table(rep, pa, cfg.precision, f"{cfg.dataset_name}: {pa}") + "\n")
    _say("wrote " + ", ".join(str(p) for p in paths) + "\n")
    return rep


def cmd_sweep(cfg: config_mod.ExperimentConfig):
    data = config_mod.load_dataset(cfg)
    pa_names = [p.name for p in data.protected]
    rows = sweep(data, cfg.plan, cfg.ensemble, cfg.sizes, jobs=cfg.jobs)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = report_mod._slug(cfg.dataset_name)
    text = report_mod.render_sweep(rows, pa_names)
    (out / f"sweep_{stem}.txt").write_text(text, encoding="utf-8")
    (out / f"sweep_{stem}.csv").write_text(report_mod.sweep_csv(rows, pa_names), encoding="utf-8")
    _say(text)
    return rows


def cmd_synth(args):
    d = make_synthetic_biased(args.n, args.bias, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_csv(d, args.out)
    _say(f"wrote {d.row_count} rows to {args.out}\n")


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "synth":
            cmd_synth(args)
            return 0
        cfg = _build(args)
        if args.command == "train":
            cmd_train(cfg)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.model, args)
        elif args.command == "compare":
            cmd_compare(cfg)
        elif args.command == "sweep":
            cmd_sweep(cfg)
    except GroupCartError as exc:
        sys.stderr.write(f"groupcart: error: {exc}\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
