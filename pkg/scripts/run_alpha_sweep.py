"""Iteration counts and speedups as the regularization weight decreases."""

import argparse
from pathlib import Path

from topt.harness import ExperimentConfig, run_sweep_alpha

HERE = Path(__file__).parent

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=HERE / "configs" / "alpha_sweep.json")
    ap.add_argument("--out", default=None)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config)
    for alpha, rep in run_sweep_alpha(cfg, args.out, args.jobs):
        print(f"alpha={alpha:7.0e} {rep.method:22s} {rep.iters:4d} pdes={rep.pdes:5d} {rep.status.value}")
