"""Resolution study at 64^2 and 128^2 with fixed and resolution-scaled smoothing."""

import argparse
from pathlib import Path

from topt.harness import ExperimentConfig, run_mesh_sweep

HERE = Path(__file__).parent

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=HERE / "configs" / "mesh_sweep.json")
    ap.add_argument("--out", default=None)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config)
    for (policy, n, nt, gamma), rep in run_mesh_sweep(cfg, args.out, args.jobs):
        print(f"{policy:6s} n={n:4d} nt={nt:3d} gamma={gamma:4.1f} {rep.method:22s} {rep.iters:4d} "
              f"pdes={rep.pdes:5d} {rep.status.value}")
