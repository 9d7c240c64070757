"""Inexact Gauss-Newton-Krylov baseline with three Hessian preconditioners."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from . import grid as G
from .fixedpoint import LineSearchFailure, LineSearchState, StopCriteria, armijo_search, stopping_check
from .grid import GridSpec
from .models import ProblemSpec, ReducedProblem, relative_grad_norm
from .report import Counters, SolveReport, Status

Array = np.ndarray
Op = Callable[[Array], Array]


class Preconditioner(str, Enum):
    IREG = "ireg"
    TWO_LEVEL = "2lrpcsym"
    H0 = "h0rpc"


@dataclass
class NewtonConfig:
    preconditioner: Preconditioner = Preconditioner.H0
    max_outer: int = 50
    eps_rel: float = 5e-2
    max_inner: int = 100
    coarse_degree: int = 5
    coarse_power_iters: int = 10
    h0_tol: float = 1e-2
    h0_max_iter: int = 50

    def __post_init__(self):
        self.preconditioner = Preconditioner(self.preconditioner)
        if self.max_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration caps must be >= 1")

    @property
    def label(self) -> str:
        return f"NK({self.preconditioner.value})"


# ---------------------------------------------------------------------------
# Krylov solvers on arrays of any shape (Euclidean inner product)


@dataclass
class KrylovInfo:
    iters: int = 0
    converged: bool = False
    breakdown: bool = False
    residuals: list[float] = field(default_factory=list)


def pcg(A: Op, b: Array, M: Op | None = None, tol: float = 1e-6, maxiter: int = 100,
        callback: Callable[[Array], None] | None = None) -> tuple[Array, KrylovInfo]:
    """Preconditioned CG from a zero initial guess; stops on ||r|| <= tol ||b||.

    Non-positive curvature flags a breakdown and returns the last iterate.
    """
    M = M or (lambda r: r)
    info = KrylovInfo()
    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b)
    info.residuals.append(float(bnorm))
    if bnorm == 0.0:
        info.converged = True
        return x, info
    r = b.copy()
    z = M(r)
    p = z.copy()
    rz = np.vdot(r, z)
    for it in range(1, maxiter + 1):
        Ap = A(p)
        pAp = np.vdot(p, Ap)
        if pAp <= 0 or rz <= 0:
            info.breakdown = True
            break
        a = rz / pAp
        x += a * p
        r -= a * Ap
        info.iters = it
        rn = float(np.linalg.norm(r))
        info.residuals.append(rn)
        if callback:
            callback(x)
        if rn <= tol * bnorm:
            info.converged = True
            break
        z = M(r)
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, info


def fgmres(A: Op, b: Array, M: Op | None = None, tol: float = 1e-6, maxiter: int = 100) -> tuple[Array, KrylovInfo]:
    """Right-preconditioned flexible GMRES (no restart), zero initial guess.

    Flexibility lets ``M`` be a nonlinear inner solve.
    """
    M = M or (lambda r: r)
    info = KrylovInfo()
    shape = b.shape
    beta = float(np.linalg.norm(b))
    info.residuals.append(beta)
    if beta == 0.0:
        info.converged = True
        return np.zeros_like(b), info
    V = [b.ravel() / beta]
    Z = []
    H = np.zeros((maxiter + 1, maxiter))
    y = np.zeros(0)
    for j in range(maxiter):
        z = np.asarray(M(V[j].reshape(shape))).ravel()
        Z.append(z)
        w = np.asarray(A(z.reshape(shape))).ravel()
        for i in range(j + 1):
            H[i, j] = np.dot(V[i], w)
            w = w - H[i, j] * V[i]
        H[j + 1, j] = np.linalg.norm(w)
        e1 = np.zeros(j + 2)
        e1[0] = beta
        y, *_ = np.linalg.lstsq(H[: j + 2, : j + 1], e1, rcond=None)
        res = float(np.linalg.norm(e1 - H[: j + 2, : j + 1] @ y))
        info.iters = j + 1
        info.residuals.append(res)
        if res <= tol * beta:
            info.converged = True
            break
        if H[j + 1, j] <= 1e-14 * beta:
            info.breakdown = not info.converged
            break
        V.append(w / H[j + 1, j])
    x = np.sum([yi * zi for yi, zi in zip(y, Z)], axis=0)
    return x.reshape(shape), info


# ---------------------------------------------------------------------------
# Hessian and preconditioners


def gn_hessian_matvec(prob: ReducedProblem, v: Array, v_tilde: Array) -> Array:
    return prob.gn_matvec(v, v_tilde)


def precond_ireg(prob: ReducedProblem, r: Array) -> Array:
    return prob.precondition(r)


def h0_matvec(prob: ReducedProblem, vt: Array, grad_m0: Array | None = None) -> Array:
    """PDE-free zero-velocity Hessian: alpha L~ vt + grad m0 (grad m0 . vt).

    L~ is the kernel-fixed regularization symbol, which keeps the operator
    invertible on constant modes.
    """
    if grad_m0 is None:
        grad_m0 = G.spectral_gradient(prob.m0, prob.grid)
    vt = prob.project(vt)
    L = G.regularization_multiplier(prob.p, prob.grid)
    reg = G.apply_multiplier(vt, prob.alpha * np.where(L == 0, 1.0, L), prob.grid)
    data = grad_m0 * np.sum(grad_m0 * vt, axis=0)
    return prob.project(reg + data)


class H0Preconditioner:
    """Approximate inverse of the zero-velocity Hessian via an inner PCG."""

    def __init__(self, prob: ReducedProblem, tol: float = 1e-2, max_iter: int = 50):
        self.prob = prob
        self.tol = tol
        self.max_iter = max_iter
        self.grad_m0 = G.spectral_gradient(prob.m0, prob.grid)
        self.inner_iters = 0
        self.last_info: KrylovInfo | None = None

    def matvec(self, vt: Array) -> Array:
        return h0_matvec(self.prob, vt, self.grad_m0)

    def __call__(self, r: Array) -> Array:
        r = self.prob.project(r)
        x, info = pcg(self.matvec, r, self.prob.precondition, tol=self.tol, maxiter=self.max_iter)
        self.inner_iters += info.iters
        self.last_info = info
        return x


def precond_h0(prob: ReducedProblem, r: Array, tol: float = 1e-2, max_iter: int = 50) -> Array:
    return H0Preconditioner(prob, tol, max_iter)(r)


class TwoLevelPreconditioner:
    """Coarse-grid preconditioner for the split Hessian K H K, K = (alpha L~)^{-1/2}.

    Applies ``(I - P R) r + P c(Hc) R r`` where ``Hc`` is the coarse split
    Hessian at the restricted velocity and ``c`` is a fixed-degree Chebyshev
    approximation of its inverse on ``[1, 1.1 lambda_max]``.  A fixed
    polynomial keeps the preconditioner linear and symmetric, so PCG applies.
    """

    def __init__(self, prob: ReducedProblem, v: Array, degree: int = 5, power_iters: int = 10):
        g = prob.grid
        if g.n1 % 4 or g.n2 % 4:
            raise ValueError("two-level preconditioner needs grid sizes divisible by 4")
        self.fine = g
        self.coarse = GridSpec(g.n1 // 2, g.n2 // 2, g.nt)
        self.prob = prob
        self.counters = Counters()
        spec = ProblemSpec(prob.kind, prob.alpha, G.spectral_restrict(prob.m0, self.coarse, g),
                           G.spectral_restrict(prob.m1, self.coarse, g), self.coarse, gamma=0.0,
                           reg_order=prob.p)
        self.cprob = ReducedProblem(spec, self.counters)
        self.vc = self.restrict(v)
        self.degree = degree
        self.lmax = self._power(power_iters)
        self.applications = 0

    def restrict(self, f: Array) -> Array:
        return G.spectral_restrict(f, self.coarse, self.fine)

    def prolong(self, f: Array) -> Array:
        return G.spectral_prolong(f, self.coarse, self.fine)

    def coarse_split(self, y: Array) -> Array:
        cp = self.cprob
        k = lambda u: cp.project(G.apply_inverse_sqrt_regularization(u, cp.alpha, cp.p, cp.grid))
        return k(cp.gn_matvec(self.vc, k(y)))

    def _power(self, iters: int) -> float:
        rng = np.random.default_rng(0)
        x = self.cprob.project(rng.standard_normal((2, *self.coarse.shape)))
        lam = 1.0
        for _ in range(iters):
            x = x / np.linalg.norm(x)
            y = self.coarse_split(x)
            lam = float(np.vdot(x, y))
            x = y
        return max(lam, 1.0)

    def chebyshev(self, b: Array) -> Array:
        if self.lmax <= 1.0 + 1e-10:
            # spectrum is {1} up to the unregularized kernel: the coarse operator is the identity
            return b.copy()
        lo, hi = 1.0, 1.1 * self.lmax
        theta, delta = 0.5 * (hi + lo), 0.5 * (hi - lo)
        sigma = theta / delta
        rho = 1.0 / sigma
        x = np.zeros_like(b)
        r = b.copy()
        d = r / theta
        for i in range(self.degree):
            x = x + d
            if i == self.degree - 1:
                break
            r = r - self.coarse_split(d)
            rho_new = 1.0 / (2.0 * sigma - rho)
            d = rho_new * rho * d + (2.0 * rho_new / delta) * r
            rho = rho_new
        return x

    def __call__(self, r: Array) -> Array:
        self.applications += 1
        rc = self.restrict(r)
        low = self.prolong(rc)
        out = r - low + self.prolong(self.chebyshev(rc))
        return self.prob.project(out)

    def flush_counts(self):
        self.prob.counters.coarse_pdes += self.counters.pdes
        self.counters.pdes = 0


def precond_two_level(prob: ReducedProblem, v: Array, r: Array, degree: int = 5) -> Array:
    pc = TwoLevelPreconditioner(prob, v, degree)
    out = pc(r)
    pc.flush_counts()
    return out


# ---------------------------------------------------------------------------
# Newton step and outer loop


def forcing_term(g: Array, g0: Array) -> float:
    return min(0.5, float(np.sqrt(relative_grad_norm(g, g0))))


def newton_direction(prob: ReducedProblem, v: Array, g: Array, eta: float, config: NewtonConfig):
    """Approximate solve of H s = -g; returns (s, KrylovInfo)."""
    H = lambda u: prob.gn_matvec(v, u)
    pc = config.preconditioner
    if pc is Preconditioner.IREG:
        return pcg(H, -g, prob.precondition, tol=eta, maxiter=config.max_inner)
    if pc is Preconditioner.TWO_LEVEL:
        K = lambda u: prob.project(G.apply_inverse_sqrt_regularization(u, prob.alpha, prob.p, prob.grid))
        tl = TwoLevelPreconditioner(prob, v, config.coarse_degree, config.coarse_power_iters)
        y, info = pcg(lambda u: K(H(K(u))), K(-g), tl, tol=eta, maxiter=config.max_inner)
        tl.flush_counts()
        return K(y), info
    h0 = H0Preconditioner(prob, config.h0_tol, config.h0_max_iter)
    return fgmres(H, -g, h0, tol=eta, maxiter=config.max_inner)


def nk_solve(prob: ReducedProblem, config: NewtonConfig | None = None, stop: StopCriteria | None = None,
             ls: LineSearchState | None = None):
    """Gauss-Newton-Krylov from v = 0 with Armijo globalization (fresh unit step each iteration)."""
    config = config or NewtonConfig()
    stop = stop or StopCriteria(config.eps_rel, config.max_outer)
    c = ls.c if ls is not None else 1e-4
    t0 = time.perf_counter()
    report = SolveReport(config.label)
    v = prob.zeros()
    g, obj = prob.gradient(v)
    g0 = g
    report.grad_history.append(relative_grad_norm(g, g0))
    report.obj_history.append(obj.total)
    status = Status.CONVERGED
    k = 0
    if np.any(g0):
        status = Status.ITERCAP
        while True:
            eta = forcing_term(g, g0)
            s, info = newton_direction(prob, v, g, eta, config)
            report.inner_iters += info.iters
            slope = prob.inner(g, s)
            if info.breakdown or not np.all(np.isfinite(s)) or slope >= 0:
                s = -prob.precondition(g)
                slope = prob.inner(g, s)
            try:
                _, _, v = armijo_search(prob.objective, v, s, slope, obj, LineSearchState(1.0, c))
            except LineSearchFailure:
                status = Status.STAGNATED
                break
            g, obj = prob.gradient(v)
            k += 1
            report.grad_history.append(relative_grad_norm(g, g0))
            report.obj_history.append(obj.total)
            if stopping_check(g, g0, k, stop):
                if relative_grad_norm(g, g0) <= stop.eps_rel:
                    status = Status.CONVERGED
                break
    prob.counters.times["total"] += time.perf_counter() - t0
    report.iters = k
    report.dist = prob.mismatch(v)
    report.grad = relative_grad_norm(g, g0)
    return v, report.finish(prob.counters, status)
