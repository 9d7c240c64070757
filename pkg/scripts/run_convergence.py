"""Method comparison on the rect fixture: RPGD, NK with each preconditioner,
the GA-NGMRES (w, sigma, tau) grid and a few GA-AA cells."""

import argparse
from pathlib import Path

from topt.harness import ExperimentConfig, run_experiment

HERE = Path(__file__).parent

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=HERE / "configs" / "convergence.json")
    ap.add_argument("--out", default=None)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cfg = ExperimentConfig.from_json(args.config)
    for rep in run_experiment(cfg, args.out, args.jobs):
        star = "*" if rep.starred else " "
        print(f"{rep.method:22s} {rep.iters:4d}{star} pdes={rep.pdes:5d} mvs={rep.matvecs:4d} "
              f"dist={rep.dist:.3e} grad={rep.grad:.3e} tts={rep.times['total']:.2f}s")
