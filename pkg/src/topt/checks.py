"""Quick self-checks run by ``topt check``: gradient vs finite differences,
NGMRES/GMRES equivalence on a linear system, Gauss-Newton symmetry."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .accel import AccelConfig, accelerate
from .data import make_sinusoidal
from .fixedpoint import StopCriteria
from .grid import GridSpec
from .models import ModelKind, ProblemSpec, ReducedProblem
from .newton import fgmres


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tol)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value:.3e} (tol {self.tol:.0e})"


def smooth_velocity(grid: GridSpec, rng: np.random.Generator, scale: float = 0.3) -> np.ndarray:
    """Random low-frequency velocity field (modes |k_i| <= 2)."""
    x1, x2 = grid.coords
    v = np.zeros((2, *grid.shape))
    for c in range(2):
        for k1 in range(3):
            for k2 in range(3):
                a, b = rng.standard_normal(2) * scale / (1 + k1 + k2)
                v[c] += a * np.cos(k1 * x1 + k2 * x2) + b * np.sin(k1 * x1 + k2 * x2)
    return v


def gradient_fd_error(kind: ModelKind | str, n: int = 32, alpha: float = 1e-2, eps: float = 1e-5,
                      trials: int = 3, seed: int = 0) -> float:
    """Worst relative gap between <g, vt> and a central difference of the objective."""
    rng = np.random.default_rng(seed)
    grid = GridSpec(n, n, 4)
    m0, m1 = make_sinusoidal(n)
    prob = ReducedProblem(ProblemSpec(kind, alpha, m0, m1, grid))
    worst = 0.0
    for _ in range(trials):
        v, vt = smooth_velocity(grid, rng), smooth_velocity(grid, rng)
        g, _ = prob.gradient(v)
        fd = (prob.objective(v + eps * vt).total - prob.objective(v - eps * vt).total) / (2 * eps)
        an = prob.inner(g, vt)
        worst = max(worst, abs(an - fd) / max(abs(fd), 1e-300))
    return worst


def spd_system(n: int = 32, seed: int = 0, cond: float = 20.0):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    A = Q @ np.diag(np.linspace(1.0, cond, n)) @ Q.T
    return A, rng.standard_normal(n)


def ngmres_gmres_gap(iters: int = 10, seed: int = 0) -> float:
    A, b = spd_system(seed=seed)
    omega = 1.0 / 21.0
    res = accelerate(lambda v, g: v - omega * g, lambda v: A @ v - b, np.zeros_like(b),
                     AccelConfig("ngmres", None), StopCriteria(1e-300, iters), record=True)
    worst = 0.0
    for k in range(1, iters + 1):
        x, _ = fgmres(lambda u: A @ u, b, tol=0.0, maxiter=k)
        ref = np.linalg.norm(b - A @ x)
        got = np.linalg.norm(b - A @ res.iterates[k])
        worst = max(worst, abs(got - ref) / ref)
    return worst


def gn_symmetry_gap(n: int = 32, alpha: float = 1e-2, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    grid = GridSpec(n, n, 4)
    m0, m1 = make_sinusoidal(n)
    prob = ReducedProblem(ProblemSpec("advection", alpha, m0, m1, grid))
    v = smooth_velocity(grid, rng)
    u, w = rng.standard_normal((2, 2, *grid.shape))
    Hu, Hw = prob.gn_matvec(v, u), prob.gn_matvec(v, w)
    return abs(prob.inner(Hu, w) - prob.inner(u, Hw)) / (np.linalg.norm(Hu) * np.linalg.norm(w) * grid.cell_area)


def run_checks() -> list[CheckResult]:
    out = [CheckResult(f"gradient-fd[{k.value}]", gradient_fd_error(k), 1e-5) for k in ModelKind]
    out.append(CheckResult("ngmres-gmres", ngmres_gmres_gap(), 1e-8))
    out.append(CheckResult("gn-symmetry", gn_symmetry_gap(), 1e-6))
    return out
