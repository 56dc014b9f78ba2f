#!/usr/bin/env python3
"""Observer-based tracking experiments: identity-weight baseline, tuned
weights, and the percentage reduction between them."""

import argparse
import json
from pathlib import Path

import numpy as np

from lqtbench import fixtures
from lqtbench.harness import ExperimentConfig, compare_runs, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", default="results/observer")
    args = parser.parse_args()

    out = Path(args.output)
    baseline_cfg = ExperimentConfig(controller="observer", steps=args.steps,
                                    seed=args.seed)
    _, baseline = run_experiment(baseline_cfg, output_dir=out / "baseline")
    print("baseline:", json.dumps(baseline, indent=2))

    tuned_cfg = ExperimentConfig(
        controller="observer", steps=args.steps, seed=args.seed,
        q_diag=tuple(np.diag(fixtures.Q_STAR_OBSERVER)),
        r_diag=tuple(np.diag(fixtures.R_STAR_OBSERVER)))
    _, tuned = run_experiment(tuned_cfg, output_dir=out / "tuned")
    print("tuned:", json.dumps(tuned, indent=2))

    print("comparison:", json.dumps(compare_runs(baseline, tuned), indent=2))


if __name__ == "__main__":
    main()
