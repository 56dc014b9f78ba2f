#!/usr/bin/env python3
"""Bayesian-optimize the diagonal cost weights for either pipeline and
persist the search history plus the best weights found."""

import argparse
import json
from pathlib import Path

from lqtbench.bayesopt import BOUNDS_PRESETS, AcquisitionConfig, save_history_csv
from lqtbench.harness import tune_weights


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pipeline", choices=["model-based", "data-driven"],
                        default="model-based")
    parser.add_argument("--bounds", choices=sorted(BOUNDS_PRESETS),
                        default="bounds-observer")
    parser.add_argument("--init", type=int, default=50)
    parser.add_argument("--iters", type=int, default=100)
    parser.add_argument("--epsilon", type=float, default=2.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", default="results/tuning")
    args = parser.parse_args()

    domain = BOUNDS_PRESETS[args.bounds]()
    acq = AcquisitionConfig(epsilon=args.epsilon, iterations=args.iters,
                            init_samples=args.init, seed=args.seed)
    result = tune_weights(args.pipeline, domain, acq)

    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    save_history_csv(result, out / "bo_history.csv")
    best = {"theta_best": list(result.theta_best),
            "fitness_best": result.fitness_best,
            "q_diag": list(result.theta_best[:5]),
            "r_diag": list(result.theta_best[5:])}
    (out / "theta_best.json").write_text(json.dumps(best, indent=2))
    print(json.dumps(best, indent=2))


if __name__ == "__main__":
    main()
