"""Command-line front end: dataset generation, the two controller
pipelines, weight tuning, named reproduction runs and run comparison.

Outputs land under --output (or the LQT_BENCH_OUTPUT environment variable,
default ./lqt-bench-out): trace.csv, summary.json and, where applicable,
dataset/kernel/tuning artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fixtures
from .bayesopt import BOUNDS_PRESETS, AcquisitionConfig, SearchDomain, save_history_csv
from .data_driven import KernelMatrix, TrainingConfig, value_iteration
from .datagen import load_dataset_csv
from .harness import (
    ExperimentConfig,
    StageError,
    compare_runs,
    make_dataset,
    run_data_driven_pipeline,
    run_experiment,
    run_observer_pipeline,
    tune_weights,
)

REPRO_COMMANDS = {
    # name -> (controller, q/r diagonals or None for identity, seed note)
    "repro-observer-baseline": ("observer", None),
    "repro-observer-bo": ("observer", "observer"),
    "repro-dd-baseline": ("data-driven", None),
    "repro-dd-bo": ("data-driven", "data-driven"),
}


def _output_root(args) -> Path:
    root = args.output or os.environ.get("LQT_BENCH_OUTPUT", "lqt-bench-out")
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            return ExperimentConfig.from_dict(json.load(fh))
    return ExperimentConfig()


def _write_summary(out: Path, trace, summary: dict) -> None:
    trace.to_csv(out / "trace.csv")
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps(summary, indent=2))


def cmd_gen_data(args) -> int:
    out = _output_root(args)
    cfg = _load_config(args)
    cfg = replace(cfg, controller="data-driven", dataset_M=args.samples,
                  dataset_seed=args.seed)
    dataset = make_dataset(cfg)
    dataset.to_csv(out / "dataset.csv", sidecar_path=out / "dataset.json")
    print(f"wrote {dataset.M} samples to {out / 'dataset.csv'}")
    return 0


def cmd_model_based(args) -> int:
    out = _output_root(args)
    cfg = replace(_load_config(args), controller="observer", seed=args.seed,
                  steps=args.steps)
    trace, summary = run_observer_pipeline(cfg)
    _write_summary(out, trace, summary)
    return 0


def cmd_train(args) -> int:
    out = _output_root(args)
    cfg = replace(_load_config(args), controller="data-driven")
    gen = fixtures.reference()
    if args.dataset:
        dataset = load_dataset_csv(args.dataset, gen)
    else:
        dataset = make_dataset(replace(cfg, dataset_seed=args.seed))
    kernel = value_iteration(dataset, cfg.training, cfg.weights(), gen)
    kernel.save(out / "kernel.npz")
    print(f"kernel saved to {out / 'kernel.npz'}; meta: {kernel.meta}")
    return 0


def cmd_run_dd(args) -> int:
    out = _output_root(args)
    cfg = replace(_load_config(args), controller="data-driven", seed=args.seed,
                  steps=args.steps, dataset_seed=args.seed)
    kernel = KernelMatrix.load(args.kernel) if args.kernel else None
    trace, summary, kernel = run_data_driven_pipeline(cfg, kernel=kernel)
    kernel.save(out / "kernel.npz")
    _write_summary(out, trace, summary)
    return 0


def cmd_tune(args) -> int:
    out = _output_root(args)
    if args.bounds in BOUNDS_PRESETS:
        domain = BOUNDS_PRESETS[args.bounds]()
    else:
        with open(args.bounds) as fh:
            data = json.load(fh)
        domain = SearchDomain(lower=np.asarray(data["lower"]),
                              upper=np.asarray(data["upper"]))
    acq = AcquisitionConfig(epsilon=args.epsilon, iterations=args.iters,
                            init_samples=args.init, seed=args.seed)
    result = tune_weights(args.pipeline, domain, acq)
    save_history_csv(result, out / "bo_history.csv")
    best = {"theta_best": list(result.theta_best),
            "fitness_best": result.fitness_best,
            "q_diag": list(result.theta_best[:5]),
            "r_diag": list(result.theta_best[5:])}
    with open(out / "theta_best.json", "w") as fh:
        json.dump(best, fh, indent=2)
    print(json.dumps(best, indent=2))
    return 0


def cmd_repro(args) -> int:
    out = _output_root(args) / args.command
    controller, weights_key = REPRO_COMMANDS[args.command]
    cfg = ExperimentConfig(controller=controller)
    if weights_key == "observer":
        cfg = replace(cfg, q_diag=tuple(np.diag(fixtures.Q_STAR_OBSERVER)),
                      r_diag=tuple(np.diag(fixtures.R_STAR_OBSERVER)))
    elif weights_key == "data-driven":
        cfg = replace(cfg, q_diag=tuple(np.diag(fixtures.Q_STAR_DATA_DRIVEN)),
                      r_diag=tuple(np.diag(fixtures.R_STAR_DATA_DRIVEN)))
    trace, summary = run_experiment(cfg, output_dir=out)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_compare(args) -> int:
    with open(args.a) as fh:
        a = json.load(fh)
    with open(args.b) as fh:
        b = json.load(fh)
    print(json.dumps(compare_runs(a, b), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lqt-bench",
        description="Observer-based and data-driven LQT benchmark runner")
    parser.add_argument("--output", default=None,
                        help="output root (default: $LQT_BENCH_OUTPUT or ./lqt-bench-out)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="simulate the probing run and save the dataset")
    p.add_argument("--config", default=None)
    p.add_argument("--samples", type=int, default=15000)
    p.add_argument("--seed", type=int, default=11)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("model-based", help="observer-based tracking run")
    p.add_argument("--config", default=None)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_model_based)

    p = sub.add_parser("train", help="learn the value kernel from data")
    p.add_argument("--config", default=None)
    p.add_argument("--dataset", default=None, help="dataset CSV (generated if absent)")
    p.add_argument("--seed", type=int, default=11)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run-dd", help="data-driven tracking run (trains if no kernel)")
    p.add_argument("--config", default=None)
    p.add_argument("--kernel", default=None, help="saved kernel .npz")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=11)
    p.set_defaults(func=cmd_run_dd)

    p = sub.add_parser("tune", help="Bayesian-optimize the cost weights")
    p.add_argument("--pipeline", choices=["model-based", "data-driven"],
                   default="model-based")
    p.add_argument("--bounds", default="bounds-observer",
                   help="preset name or JSON file with lower/upper arrays")
    p.add_argument("--init", type=int, default=50)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--epsilon", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_tune)

    for name in REPRO_COMMANDS:
        p = sub.add_parser(name, help=f"reproduction run: {name.removeprefix('repro-')}")
        p.set_defaults(func=cmd_repro)

    p = sub.add_parser("compare", help="percentage reductions between two summaries")
    p.add_argument("a", help="baseline summary.json")
    p.add_argument("b", help="comparison summary.json")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
