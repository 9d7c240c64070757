"""``topt`` command line: run experiments, generate datasets, self-check."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .checks import run_checks
from .data import DatasetKind, make_dataset, save_field, save_pgm
from .harness import ConfigError, ExperimentConfig, run_experiment, run_mesh_sweep, run_sweep_alpha
from .report import Status

EXIT_OK, EXIT_STAGNATED, EXIT_CONFIG = 0, 1, 2


def _run(args) -> int:
    try:
        config = ExperimentConfig.from_json(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or config.output)
    reports = run_experiment(config, out, args.jobs)
    if config.alpha_sweep:
        reports += [r for _, r in run_sweep_alpha(config, out, args.jobs)]
    if config.mesh_sweep:
        reports += [r for _, r in run_mesh_sweep(config, out, args.jobs)]
    (out / "manifest.json").write_text(json.dumps({"config": str(args.config), "seed": args.seed}, indent=2) + "\n")
    for r in reports:
        print(f"{r.method:28s} iters={r.iters:4d} pdes={r.pdes:5d} dist={r.dist:.4f} grad={r.grad:.2e} {r.status.value}")
    if args.strict and any(r.status is Status.STAGNATED for r in reports):
        return EXIT_STAGNATED
    return EXIT_OK


def _gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    m0, m1 = make_dataset(args.dataset, args.n)
    for name, f in (("m0", m0), ("m1", m1)):
        save_field(out / f"{name}.f2d", f)
        save_pgm(out / f"{name}.pgm", f / max(float(np.max(f)), 1e-300))
    print(f"wrote {args.dataset} n={args.n} to {out}")
    return EXIT_OK


def _check(args) -> int:
    ok = True
    for res in run_checks():
        print(res.line())
        ok &= res.passed
    return EXIT_OK if ok else EXIT_STAGNATED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="topt", description="transport optimization experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--seed", type=int, default=0, help="recorded in the manifest; solvers are deterministic")
    r.add_argument("--strict", action="store_true", help="exit 1 if any run stagnated")
    r.set_defaults(func=_run)
    g = sub.add_parser("gen", help="write a synthetic template/reference pair")
    g.add_argument("dataset", choices=[k.value for k in DatasetKind])
    g.add_argument("--n", type=int, default=64)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_gen)
    c = sub.add_parser("check", help="run the oracle self-checks")
    c.set_defaults(func=_check)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
