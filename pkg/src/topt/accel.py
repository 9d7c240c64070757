"""Windowed NGMRES / Anderson acceleration of the fixed-point map and their
generalized alternating variants.

The driver :func:`accelerate` works on plain arrays with user supplied ``q``
and ``grad`` callables, so the same code runs the PDE problem and linear test
systems.  :func:`ga_solve` binds it to a :class:`ReducedProblem`.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .fixedpoint import LineSearchFailure, LineSearchState, StopCriteria, q_map, stopping_check
from .models import ReducedProblem, relative_grad_norm
from .report import Counters, SolveReport, Status

PIVOT_DROP = 1e-12


class Variant(str, Enum):
    NGMRES = "ngmres"
    AA = "aa"


class Ordering(str, Enum):
    ACCEL_FIRST = "accel_first"
    FP_FIRST = "fp_first"


@dataclass
class AccelConfig:
    """``w=None`` means untruncated depth (resolved to ``2 * n_iter``)."""

    variant: Variant = Variant.NGMRES
    w: int | None = 20
    sigma: int = 1
    tau: int = 0
    ordering: Ordering = Ordering.ACCEL_FIRST

    def __post_init__(self):
        self.variant = Variant(self.variant)
        self.ordering = Ordering(self.ordering)
        if self.w is not None and self.w < 1:
            raise ValueError("window depth must be >= 1")
        if self.sigma < 1 or self.tau < 0:
            raise ValueError("need sigma >= 1 and tau >= 0")

    def depth(self, n_iter: int) -> int:
        return 2 * n_iter if self.w is None else self.w

    def is_fp_step(self, k: int) -> bool:
        period = self.sigma + self.tau
        if self.ordering is Ordering.ACCEL_FIRST:
            return k % period >= self.sigma
        return k % period < self.tau

    @property
    def label(self) -> str:
        w = "inf" if self.w is None else str(self.w)
        name = "NGMRES" if self.variant is Variant.NGMRES else "AA"
        if self.ordering is Ordering.FP_FIRST:
            return f"a{name}({w})[{self.sigma}]-FP[{self.tau}]"
        return f"GA-{name}({w};{self.sigma},{self.tau})"


def solve_mixing_lsq(rhs: np.ndarray, columns: list[np.ndarray]) -> np.ndarray:
    """argmin_b ||rhs + sum_i b_i col_i||_2 by column-pivoted QR.

    Columns whose pivot falls below ``PIVOT_DROP`` times the largest pivot get a
    zero coefficient.
    """
    if not columns:
        raise ValueError("need at least one column")
    A = np.stack([np.ravel(c) for c in columns], axis=1)
    b = np.ravel(rhs)
    beta = np.zeros(A.shape[1])
    Q, R, piv = sla.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return beta
    r = int(np.sum(diag > PIVOT_DROP * diag[0]))
    z = sla.solve_triangular(R[:r, :r], -(Q[:, :r].T @ b))
    beta[piv[:r]] = z
    return beta


def ngmres_update(qv: np.ndarray, iterates: list[np.ndarray], beta: np.ndarray) -> np.ndarray:
    """q(v_k) + sum_i beta_i (q(v_k) - v_{k-i}),  i = 0..w_k."""
    if len(iterates) != len(beta):
        raise ValueError("coefficient count does not match history")
    out = qv.copy()
    for b, vi in zip(beta, iterates):
        out += b * (qv - vi)
    return out


def aa_update(qv: np.ndarray, q_history: list[np.ndarray], xi: np.ndarray) -> np.ndarray:
    """q(v_k) + sum_i xi_i (q(v_k) - q(v_{k-i})),  i = 1..w_k."""
    if len(q_history) != len(xi):
        raise ValueError("coefficient count does not match history")
    out = qv.copy()
    for x, qi in zip(xi, q_history):
        out += x * (qv - qi)
    return out


@dataclass
class AccelResult:
    v: np.ndarray
    g: np.ndarray
    g0: np.ndarray
    iters: int
    status: Status
    grad_history: list[float]
    iterates: list[np.ndarray] | None = None


def accelerate(q: Callable[[np.ndarray, np.ndarray], np.ndarray], grad: Callable[[np.ndarray], np.ndarray],
               v0: np.ndarray, config: AccelConfig, stop: StopCriteria, record: bool = False,
               counters: Counters | None = None, on_iter: Callable[[int, np.ndarray], None] | None = None
               ) -> AccelResult:
    """Generalized alternating NGMRES/AA driver.

    ``q(v, g)`` is the fixed-point map given the gradient at ``v`` and may raise
    :class:`LineSearchFailure`; ``grad(v)`` returns the gradient.
    """
    counters = counters or Counters()
    w = config.depth(stop.n_iter)
    ngmres = config.variant is Variant.NGMRES
    v = np.array(v0, dtype=float)
    g = grad(v)
    g0 = g
    hist_rel = [relative_grad_norm(g, g0)]
    iterates = [v] if record else None
    # NGMRES keeps (v_{k-i}, g_{k-i}) for i = 0..w; AA keeps (r_{k-i}, q_{k-i}) for i = 1..w
    hist: deque = deque([(v, g)] if ngmres else [], maxlen=w + 1 if ngmres else w)
    if not np.any(g0):
        return AccelResult(v, g, g0, 0, Status.CONVERGED, hist_rel, iterates)

    status = Status.ITERCAP
    k = 0
    while True:
        fp_step = config.is_fp_step(k)
        try:
            qv = q(v, g)
        except LineSearchFailure:
            qv = None
        if qv is None:
            # no descent step available: try a pure secant step from history, else give up
            if fp_step or not ngmres or len(hist) < 2:
                status = Status.STAGNATED
                break
            qv = v

        if fp_step:
            v_new = qv
            if not ngmres:
                hist.appendleft((v - qv, qv))
        elif ngmres:
            gq = grad(qv)
            with counters.timer("ls"):
                beta = solve_mixing_lsq(gq, [gq - gi for _, gi in hist])
            v_new = ngmres_update(qv, [vi for vi, _ in hist], beta)
        else:
            r = v - qv
            if hist:
                with counters.timer("ls"):
                    xi = solve_mixing_lsq(r, [r - ri for ri, _ in hist])
                v_new = aa_update(qv, [qi for _, qi in hist], xi)
            else:
                v_new = qv
            hist.appendleft((r, qv))

        if np.array_equal(v_new, v):
            status = Status.STAGNATED
            break
        g_new = grad(v_new)
        if not np.all(np.isfinite(g_new)):
            status = Status.STAGNATED
            break
        v, g = v_new, g_new
        k += 1
        if ngmres:
            hist.appendleft((v, g))
        hist_rel.append(relative_grad_norm(g, g0))
        if record:
            iterates.append(v)
        if on_iter:
            on_iter(k, v)
        if stopping_check(g, g0, k, stop):
            if relative_grad_norm(g, g0) <= stop.eps_rel:
                status = Status.CONVERGED
            break
    return AccelResult(v, g, g0, k, status, hist_rel, iterates)


def ga_solve(prob: ReducedProblem, config: AccelConfig, stop: StopCriteria | None = None,
             ls: LineSearchState | None = None, record: bool = False):
    """Run the accelerated fixed-point scheme on a transport problem from v = 0."""
    stop = stop or StopCriteria()
    ls = ls or LineSearchState()
    t0 = time.perf_counter()
    obj_hist = []

    def q(v, g):
        return q_map(prob, v, ls, g)[0]

    def grad(v):
        g, obj = prob.gradient(v)
        obj_hist.append(obj.total)
        return g

    res = accelerate(q, grad, prob.zeros(), config, stop, record=record, counters=prob.counters)
    prob.counters.times["total"] += time.perf_counter() - t0
    report = SolveReport(config.label, iters=res.iters, w=config.w if config.w is not None else config.depth(stop.n_iter),
                         sigma=config.sigma, tau=config.tau)
    report.grad_history = res.grad_history
    report.obj_history = obj_hist
    report.dist = prob.mismatch(res.v)
    report.grad = relative_grad_norm(res.g, res.g0)
    report.finish(prob.counters, res.status)
    if record:
        report.iterates = res.iterates
    return res.v, report
