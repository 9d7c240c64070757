"""Regularization-preconditioned gradient descent viewed as a fixed-point map."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import grid as G
from .models import ObjectiveValue, ReducedProblem, relative_grad_norm
from .report import SolveReport, Status


class LineSearchFailure(RuntimeError):
    """Armijo backtracking exhausted its halvings."""


@dataclass
class LineSearchState:
    rho: float = 1.0
    c: float = 1e-4
    max_halvings: int = 50

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")


@dataclass
class StopCriteria:
    eps_rel: float = 5e-2
    n_iter: int = 200

    def __post_init__(self):
        if self.eps_rel <= 0 or self.n_iter < 1:
            raise ValueError("need eps_rel > 0 and n_iter >= 1")


def stopping_check(g_new: np.ndarray, g0: np.ndarray, k: int, stop: StopCriteria) -> bool:
    """``||g_new||_inf <= eps * ||g0||_inf`` or ``k >= n_iter``."""
    return bool(np.max(np.abs(g_new)) <= stop.eps_rel * np.max(np.abs(g0)) or k >= stop.n_iter)


def search_direction(g: np.ndarray, alpha: float, p: int, grid: G.GridSpec, project: bool = False) -> np.ndarray:
    s = -G.apply_inverse_regularization(g, alpha, p, grid)
    return G.leray_project(s, grid) if project else s


def armijo_search(objective: Callable[[np.ndarray], ObjectiveValue], v: np.ndarray, s: np.ndarray,
                  slope: float, obj_v: ObjectiveValue, ls: LineSearchState):
    """Backtracking from the stored step; returns (rho, trial objective, trial point).

    ``slope`` is the directional derivative <g, s> and must be negative.  A
    first-trial success doubles the stored step for the next call, otherwise the
    accepted step is stored.
    """
    if not slope < 0:
        raise ValueError("search direction is not a descent direction")
    rho = ls.rho
    f0 = obj_v.total
    for i in range(ls.max_halvings + 1):
        trial = v + rho * s
        ft = objective(trial)
        if ft.total < f0 + rho * ls.c * slope:
            ls.rho = 2.0 * rho if i == 0 else rho
            return rho, ft, trial
        rho *= 0.5
    raise LineSearchFailure(f"Armijo condition not met after {ls.max_halvings} halvings")


def q_map(prob: ReducedProblem, v: np.ndarray, ls: LineSearchState, g: np.ndarray | None = None):
    """One line-searched RPGD step; returns (q(v), g(v), rho)."""
    with prob.counters.timer("q"):
        if g is None:
            g, obj = prob.gradient(v)
        else:
            obj = prob.objective(v)
        if not np.any(g):
            return v, g, 0.0
        s = -prob.precondition(g)
        rho, _, qv = armijo_search(prob.objective, v, s, prob.inner(g, s), obj, ls)
    return qv, g, rho


def residual(v: np.ndarray, qv: np.ndarray) -> np.ndarray:
    return v - qv


def rpgd_solve(prob: ReducedProblem, stop: StopCriteria | None = None, ls: LineSearchState | None = None,
               callback: Callable[[int, np.ndarray], None] | None = None):
    stop = stop or StopCriteria()
    ls = ls or LineSearchState()
    report = SolveReport("rpgd")
    t0 = time.perf_counter()
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
            try:
                v, _, _ = q_map(prob, v, ls, g)
            except LineSearchFailure:
                status = Status.STAGNATED
                break
            g, obj = prob.gradient(v)
            k += 1
            report.grad_history.append(relative_grad_norm(g, g0))
            report.obj_history.append(obj.total)
            if callback:
                callback(k, v)
            if stopping_check(g, g0, k, stop):
                if relative_grad_norm(g, g0) <= stop.eps_rel:
                    status = Status.CONVERGED
                break
    prob.counters.times["total"] += time.perf_counter() - t0
    report.iters = k
    report.dist = prob.mismatch(v)
    report.grad = relative_grad_norm(g, g0)
    return v, report.finish(prob.counters, status)
