"""Counters and per-run reports shared by all solvers."""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum


class Status(str, Enum):
    CONVERGED = "converged"
    ITERCAP = "itercap"
    STAGNATED = "stagnated"


@dataclass
class Counters:
    """Work accumulator threaded through one solve.

    ``pdes`` counts every fine-grid forward, adjoint and incremental sweep;
    ``coarse_pdes`` the sweeps spent inside the two-level preconditioner.
    """

    pdes: int = 0
    matvecs: int = 0
    coarse_pdes: int = 0
    times: dict[str, float] = field(default_factory=lambda: dict.fromkeys(("pdes", "mvs", "q", "f", "ls", "total"), 0.0))

    @contextmanager
    def timer(self, key: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.times[key] = self.times.get(key, 0.0) + time.perf_counter() - t0


@dataclass
class SolveReport:
    method: str
    iters: int = 0
    pdes: int = 0
    matvecs: int = 0
    dist: float = 0.0
    grad: float = 0.0
    status: Status = Status.CONVERGED
    w: int | None = None
    sigma: int | None = None
    tau: int | None = None
    times: dict[str, float] = field(default_factory=dict)
    grad_history: list[float] = field(default_factory=list)
    obj_history: list[float] = field(default_factory=list)
    inner_iters: int = 0
    coarse_pdes: int = 0
    iterates: list | None = None

    def finish(self, counters: Counters, status: Status):
        self.pdes = counters.pdes
        self.matvecs = counters.matvecs
        self.coarse_pdes = counters.coarse_pdes
        self.times = dict(counters.times)
        self.status = status
        return self

    @property
    def starred(self) -> bool:
        return self.status is Status.ITERCAP
