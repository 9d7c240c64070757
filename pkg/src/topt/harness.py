"""Config-driven experiment runner: solves, sweeps, CSV tables and diagnostics."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import grid as G
from .accel import AccelConfig, Ordering, Variant, ga_solve
from .data import make_dataset, save_field
from .fixedpoint import StopCriteria, rpgd_solve
from .grid import GridSpec
from .models import ModelKind, ProblemSpec, ReducedProblem
from .newton import NewtonConfig, nk_solve
from .report import SolveReport
from .transport import compute_flow_map, det_deformation_gradient

CSV_COLUMNS = ["run", "method", "w", "sigma", "tau", "iters", "pdes", "matvecs", "dist", "grad",
               "t_pdes", "t_q", "t_f", "t_ls", "t_total", "status"]
TIMING_COLUMNS = ("t_pdes", "t_q", "t_f", "t_ls", "t_total")


class ConfigError(ValueError):
    """Experiment configuration failed validation."""


def load_schema() -> dict:
    return json.loads(resources.files("topt").joinpath("experiment.schema.json").read_text())


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class MethodCell:
    """One solver run: ``kind`` in {rpgd, ga, nk} with its hyperparameters."""

    kind: str
    accel: AccelConfig | None = None
    newton: NewtonConfig | None = None

    @property
    def label(self) -> str:
        if self.kind == "ga":
            return self.accel.label
        if self.kind == "nk":
            return self.newton.label
        return "RPGD"


@dataclass
class ExperimentConfig:
    dataset: str = "rect"
    n: int = 64
    nt: int = 4
    gamma: float = 1.0
    model: ModelKind = ModelKind.ADVECTION
    alpha: float = 1e-3
    stop: StopCriteria = field(default_factory=StopCriteria)
    cells: list[MethodCell] = field(default_factory=lambda: [MethodCell("rpgd")])
    alpha_sweep: list[float] = field(default_factory=list)
    mesh_sweep: list[int] = field(default_factory=list)
    gamma_policies: list[str] = field(default_factory=lambda: ["fixed", "scaled"])
    diagnostics: bool = False
    output: str = "results"
    name: str = "experiment"

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentConfig:
        try:
            jsonschema.validate(doc, load_schema())
        except jsonschema.ValidationError as exc:
            loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{loc}: {exc.message}") from None
        ds, model, stop = doc["dataset"], doc["model"], doc.get("stop", {})
        stop = StopCriteria(stop.get("eps_rel", 5e-2), stop.get("n_iter", 200))
        sweep = doc.get("sweep", {})
        return cls(dataset=ds["kind"], n=ds["n"], nt=ds.get("nt", 4), gamma=ds.get("gamma", 1.0),
                   model=ModelKind(model["kind"]), alpha=model["alpha"], stop=stop,
                   cells=expand_methods(doc["methods"], stop),
                   alpha_sweep=list(sweep.get("alpha", [])), mesh_sweep=list(sweep.get("n", [])),
                   gamma_policies=list(sweep.get("gamma_policy", ["fixed", "scaled"])),
                   diagnostics=doc.get("diagnostics", False), output=doc.get("output", "results"),
                   name=doc.get("name", "experiment"))

    @classmethod
    def from_json(cls, path: str | Path) -> ExperimentConfig:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(doc)

    def problem_spec(self, n: int | None = None, nt: int | None = None, gamma: float | None = None,
                     alpha: float | None = None) -> ProblemSpec:
        n = n or self.n
        m0, m1 = make_dataset(self.dataset, n)
        grid = GridSpec(n, n, nt or self.nt)
        return ProblemSpec(self.model, alpha or self.alpha, m0, m1, grid,
                           gamma=self.gamma if gamma is None else gamma)


def expand_methods(methods: list[dict], stop: StopCriteria) -> list[MethodCell]:
    """Expand method entries into cells; GA grids iterate schedules outermost, then depths."""
    cells = []
    for m in methods:
        if m["type"] == "rpgd":
            cells.append(MethodCell("rpgd"))
        elif m["type"] == "nk":
            cfg = NewtonConfig(m.get("preconditioner", "h0rpc"), max_outer=stop.n_iter, eps_rel=stop.eps_rel,
                               max_inner=m.get("max_inner", 100))
            cells.append(MethodCell("nk", newton=cfg))
        else:
            ws = m.get("w", 20)
            ws = ws if isinstance(ws, list) else [ws]
            for sigma, tau in m.get("schedule", [[1, 0]]):
                for w in ws:
                    cfg = AccelConfig(Variant(m.get("variant", "ngmres")), None if w == "inf" else w, sigma, tau,
                                      Ordering(m.get("ordering", "accel_first")))
                    cells.append(MethodCell("ga", accel=cfg))
    return cells


# ---------------------------------------------------------------------------
# running


def run_cell(spec: ProblemSpec, cell: MethodCell, stop: StopCriteria) -> tuple[np.ndarray, SolveReport]:
    prob = ReducedProblem(spec)
    if cell.kind == "rpgd":
        return rpgd_solve(prob, stop)
    if cell.kind == "nk":
        return nk_solve(prob, cell.newton, stop)
    v, rep = ga_solve(prob, cell.accel, stop)
    if cell.accel.w is None:
        rep.w = cell.accel.depth(stop.n_iter)
    return v, rep


def _run_job(args):
    spec, cell, stop = args
    return run_cell(spec, cell, stop)


def run_jobs(jobs_args: list, jobs: int = 1) -> list[tuple[np.ndarray, SolveReport]]:
    if jobs <= 1 or len(jobs_args) <= 1:
        return [_run_job(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_job, jobs_args))


def report_row(run: int, rep: SolveReport) -> dict:
    t = rep.times
    blank = lambda x: "" if x is None else x
    return {
        "run": run, "method": rep.method, "w": blank(rep.w), "sigma": blank(rep.sigma), "tau": blank(rep.tau),
        "iters": rep.iters, "pdes": rep.pdes, "matvecs": rep.matvecs,
        "dist": f"{rep.dist:.6e}", "grad": f"{rep.grad:.6e}",
        "t_pdes": f"{t.get('pdes', 0.0):.4f}", "t_q": f"{t.get('q', 0.0):.4f}", "t_f": f"{t.get('f', 0.0):.4f}",
        "t_ls": f"{t.get('ls', 0.0):.4f}", "t_total": f"{t.get('total', 0.0):.4f}",
        "status": rep.status.value,
    }


def write_csv(path: Path, rows: list[dict], columns: list[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None, jobs: int = 1):
    """One row per method cell; writes ``<out>/results.csv``."""
    spec = config.problem_spec()
    results = run_jobs([(spec, c, config.stop) for c in config.cells], jobs)
    reports = [r for _, r in results]
    rows = [report_row(i + 1, r) for i, r in enumerate(reports)]
    out = Path(out_dir or config.output)
    write_csv(out / "results.csv", rows, CSV_COLUMNS)
    if config.diagnostics:
        for i, (v, rep) in enumerate(results):
            emit_diagnostics(v, spec, out / f"run{i + 1:03d}")
    return reports


def speedups(tts: list[float], is_baseline: list[bool]) -> list[float]:
    """Best baseline time divided by each method's time (fastest overall if no baseline)."""
    pool = [t for t, b in zip(tts, is_baseline) if b] or list(tts)
    best = min(pool)
    return [best / t if t > 0 else float("inf") for t in tts]


def run_sweep_alpha(config: ExperimentConfig, out_dir: str | Path | None = None, jobs: int = 1):
    """Per-alpha blocks with a speedup column relative to the fastest RPGD/NK baseline."""
    alphas = config.alpha_sweep or [config.alpha]
    args = [(config.problem_spec(alpha=a), c, config.stop) for a in alphas for c in config.cells]
    results = run_jobs(args, jobs)
    rows, reports, k = [], [], 0
    for a in alphas:
        block = [r for _, r in results[k:k + len(config.cells)]]
        k += len(config.cells)
        sp = speedups([r.times["total"] for r in block], [c.kind != "ga" for c in config.cells])
        for r, s in zip(block, sp):
            reports.append((a, r))
            rows.append({"alpha": a, **report_row(len(rows) + 1, r), "speedup": f"{s:.3f}"})
    write_csv(Path(out_dir or config.output) / "alpha_sweep.csv", rows, ["alpha", *CSV_COLUMNS, "speedup"])
    return reports


def mesh_levels(config: ExperimentConfig, policy: str) -> list[tuple[int, int, float]]:
    """(n, nt, gamma) per level; nt doubles with n, gamma scales with n under the 'scaled' policy."""
    out = []
    for n in config.mesh_sweep or [config.n]:
        ratio = n / config.n
        nt = max(1, int(round(config.nt * ratio)))
        gamma = config.gamma * ratio if policy == "scaled" else config.gamma
        out.append((n, nt, gamma))
    return out


def run_mesh_sweep(config: ExperimentConfig, out_dir: str | Path | None = None, jobs: int = 1):
    keys, args = [], []
    for policy in config.gamma_policies:
        for n, nt, gamma in mesh_levels(config, policy):
            spec = config.problem_spec(n=n, nt=nt, gamma=gamma)
            for c in config.cells:
                keys.append((policy, n, nt, gamma))
                args.append((spec, c, config.stop))
    results = run_jobs(args, jobs)
    rows, reports = [], []
    for (policy, n, nt, gamma), (_, r) in zip(keys, results):
        reports.append(((policy, n, nt, gamma), r))
        rows.append({"policy": policy, "n": n, "nt": nt, "gamma": gamma, **report_row(len(rows) + 1, r)})
    write_csv(Path(out_dir or config.output) / "mesh_sweep.csv", rows, ["policy", "n", "nt", "gamma", *CSV_COLUMNS])
    return reports


# ---------------------------------------------------------------------------
# diagnostics


def det_stats(det: np.ndarray) -> dict:
    return {"min": float(det.min()), "mean": float(det.mean()), "max": float(det.max()), "std": float(det.std())}


def emit_diagnostics(v: np.ndarray, spec: ProblemSpec, out_dir: str | Path) -> dict:
    """Write terminal state, residual, flow map and det(grad y) plus a JSON summary."""
    out = Path(out_dir)
    prob = ReducedProblem(spec)
    vp = prob.project(v)
    m_final = prob.terminal_state(vp)
    y = compute_flow_map(vp, spec.grid)
    det = det_deformation_gradient(y, spec.grid)
    stats = det_stats(det)
    summary = {"det_grad_y": stats, "dist": prob.mismatch(vp),
               "max_abs_divergence": float(np.max(np.abs(G.spectral_divergence(vp, spec.grid))))}
    try:
        out.mkdir(parents=True, exist_ok=True)
        save_field(out / "m_final.f2d", m_final)
        save_field(out / "residual.f2d", np.abs(m_final - prob.m1))
        save_field(out / "flow_map.f2d", y)
        save_field(out / "det_grad_y.f2d", det)
        (out / "diagnostics.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"writing diagnostics to {out}: {exc}") from exc
    return summary


def with_cells(config: ExperimentConfig, cells: list[MethodCell]) -> ExperimentConfig:
    return replace(config, cells=cells)
