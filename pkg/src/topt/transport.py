"""Semi-Lagrangian transport solvers for a stationary velocity field.

One time step maps a slice ``m_j`` to ``m_{j+1} = E * W m_j`` where ``W``
evaluates the cubic-spline interpolant of ``m_j`` at the RK2 departure points
and ``E`` is the integrating factor of the continuity source term (``E = 1``
for pure advection).  Because ``v`` is stationary the departure points, ``W``
and ``E`` are shared by all steps, so they are assembled once per velocity.

The backward sweep applies ``W^T``; it is the discrete adjoint of the forward
sweep and conserves ``sum(lambda)`` exactly.  ``tangent`` and ``pullback`` are
the exact linearization of the forward sweep with respect to ``v`` and its
transpose, which is what the reduced gradient and the Gauss-Newton matvec
need.
"""

from __future__ import annotations

import numpy as np

from . import grid as G
from .grid import GridSpec


def trace_departure(v: np.ndarray, dt: float, grid: GridSpec) -> np.ndarray:
    """RK2 midpoint departure points ``X = x - dt * v(x - dt/2 v(x))`` (unwrapped)."""
    return SemiLagrangian(v, grid, dt=dt).X.reshape(2, *grid.shape)


class SemiLagrangian:
    """Assembled semi-Lagrangian step for one velocity field."""

    def __init__(self, v: np.ndarray, grid: GridSpec, continuity: bool = False, dt: float | None = None):
        self.grid = grid
        self.dt = grid.ht if dt is None else dt
        self.continuity = continuity
        n = grid.size
        x = grid.coords.reshape(2, n)
        vf = np.asarray(v, dtype=float).reshape(2, n)
        self._cv = G.spline_coefficients(vf.reshape(2, *grid.shape), grid).reshape(2, n)

        self.Y = x - 0.5 * self.dt * vf
        self.BY = G.interpolation_matrix(self.Y, grid)
        self.DY = (G.interpolation_matrix(self.Y, grid, (1, 0)), G.interpolation_matrix(self.Y, grid, (0, 1)))
        self.vmid = np.stack([self.BY @ self._cv[0], self.BY @ self._cv[1]])
        # d vmid_c / d Y_d at each node
        self._dvmid = np.array([[self.DY[d] @ self._cv[c] for d in range(2)] for c in range(2)])

        self.X = x - self.dt * self.vmid
        # v = 0 leaves every node in place; use the exact identity instead of a roundoff-level spline
        self.identity = not np.any(vf)
        self.BX = G.interpolation_matrix(self.X, grid)
        self.BXT = self.BX.T.tocsr()
        self.DX = (G.interpolation_matrix(self.X, grid, (1, 0)), G.interpolation_matrix(self.X, grid, (0, 1)))

        if continuity:
            div = G.spectral_divergence(vf.reshape(2, *grid.shape), grid)
            self._cdiv = G.spline_coefficients(div, grid).ravel()
            self.D = self.BY @ self._cdiv
            self._dD = np.stack([self.DY[0] @ self._cdiv, self.DY[1] @ self._cdiv])
            self.E = np.exp(-self.dt * self.D)
        else:
            self.E = None

    # -- single steps -------------------------------------------------------

    def _coef(self, f: np.ndarray) -> np.ndarray:
        return G.spline_coefficients(f.reshape(self.grid.shape), self.grid).ravel()

    def _interp(self, f: np.ndarray) -> np.ndarray:
        if self.identity:
            return np.array(f, dtype=float).ravel()
        return self.BX @ self._coef(f)

    def _interp_grad(self, f: np.ndarray) -> np.ndarray:
        c = self._coef(f)
        return np.stack([self.DX[0] @ c, self.DX[1] @ c])

    def step(self, f: np.ndarray) -> np.ndarray:
        out = self._interp(f)
        if self.E is not None:
            out = out * self.E
        return out.reshape(self.grid.shape)

    def step_transpose(self, lam: np.ndarray) -> np.ndarray:
        t = lam.ravel()
        if self.E is not None:
            t = t * self.E
        if self.identity:
            return t.reshape(self.grid.shape).copy()
        return self._coef(self.BXT @ t).reshape(self.grid.shape)

    # -- sweeps -------------------------------------------------------------

    def forward(self, m0: np.ndarray) -> np.ndarray:
        out = np.empty((self.grid.nt + 1, *self.grid.shape))
        out[0] = m0
        for j in range(self.grid.nt):
            out[j + 1] = self.step(out[j])
        return out

    def backward(self, terminal: np.ndarray) -> np.ndarray:
        out = np.empty((self.grid.nt + 1, *self.grid.shape))
        out[-1] = terminal
        for j in range(self.grid.nt - 1, -1, -1):
            out[j] = self.step_transpose(out[j + 1])
        return out

    def departure_tangent(self, vt: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        """Directional derivatives (dX, dE) for a velocity perturbation ``vt``."""
        n = self.grid.size
        vtf = np.asarray(vt, dtype=float).reshape(2, n)
        ct = G.spline_coefficients(vtf.reshape(2, *self.grid.shape), self.grid).reshape(2, n)
        dY = -0.5 * self.dt * vtf
        dvmid = np.stack([self.BY @ ct[c] + self._dvmid[c, 0] * dY[0] + self._dvmid[c, 1] * dY[1] for c in range(2)])
        dX = -self.dt * dvmid
        dE = None
        if self.continuity:
            divt = G.spectral_divergence(vtf.reshape(2, *self.grid.shape), self.grid)
            dD = self.BY @ self._coef(divt) + self._dD[0] * dY[0] + self._dD[1] * dY[1]
            dE = -self.dt * self.E * dD
        return dX, dE

    def tangent(self, vt: np.ndarray, m: np.ndarray) -> np.ndarray:
        """Incremental state: exact linearization of ``forward`` along ``vt``, zero initial slice."""
        dX, dE = self.departure_tangent(vt)
        out = np.zeros_like(m)
        for j in range(self.grid.nt):
            gm = self._interp_grad(m[j])
            src = gm[0] * dX[0] + gm[1] * dX[1]
            nxt = self._interp(out[j]) + src
            if self.E is not None:
                nxt = self.E * nxt + dE * self._interp(m[j])
            out[j + 1] = nxt.reshape(self.grid.shape)
        return out

    def pullback(self, lam: np.ndarray, m: np.ndarray) -> np.ndarray:
        """Transpose of ``tangent``: sensitivity of ``sum_j <lam_j, m_j>`` w.r.t. ``v``.

        ``lam`` holds the backward sweep (``lam[j] = dJ/dm_j``), ``m`` the forward
        states.  Returned in the flat (unweighted) inner product, shape (2, n1, n2).
        """
        n = self.grid.size
        aX = np.zeros((2, n))
        aE = np.zeros(n) if self.E is not None else None
        for j in range(self.grid.nt):
            lj = lam[j + 1].ravel()
            gm = self._interp_grad(m[j])
            w = lj * self.E if self.E is not None else lj
            aX += w * gm
            if aE is not None:
                aE += lj * self._interp(m[j])
        return self.departure_pullback(aX, aE)

    def departure_pullback(self, aX: np.ndarray, aE: np.ndarray | None = None) -> np.ndarray:
        """Transpose of ``departure_tangent``."""
        gshape = self.grid.shape
        avmid = -self.dt * aX
        out = np.stack([self._coef(self.BY.T @ avmid[c]) for c in range(2)])
        aY = np.stack([avmid[0] * self._dvmid[0, d] + avmid[1] * self._dvmid[1, d] for d in range(2)])
        if aE is not None:
            aD = -self.dt * self.E * aE
            adiv = self._coef(self.BY.T @ aD).reshape(gshape)
            # adjoint of the spectral divergence is minus the spectral gradient
            out = out - G.spectral_gradient(adiv, self.grid).reshape(2, -1)
            aY = aY + aD * self._dD
        out = out - 0.5 * self.dt * aY
        return out.reshape(2, *gshape)


# ---------------------------------------------------------------------------
# functional API


def solve_state_advection(m0: np.ndarray, v: np.ndarray, grid: GridSpec) -> np.ndarray:
    return SemiLagrangian(v, grid).forward(m0)


def solve_continuity_forward(pi0: np.ndarray, v: np.ndarray, grid: GridSpec) -> np.ndarray:
    return SemiLagrangian(v, grid, continuity=True).forward(pi0)


def solve_adjoint(m_final: np.ndarray, m1: np.ndarray, v: np.ndarray, grid: GridSpec, continuity: bool = False) -> np.ndarray:
    """Adjoint sweep backward in time with terminal value ``m(1) - m1``."""
    return SemiLagrangian(v, grid, continuity=continuity).backward(m_final - m1)


def solve_incremental_state(v: np.ndarray, v_tilde: np.ndarray, m: np.ndarray, grid: GridSpec,
                            continuity: bool = False) -> np.ndarray:
    return SemiLagrangian(v, grid, continuity=continuity).tangent(v_tilde, m)


def solve_incremental_adjoint(v: np.ndarray, v_tilde: np.ndarray, lam: np.ndarray, m_tilde_final: np.ndarray,
                              grid: GridSpec, continuity: bool = False) -> np.ndarray:
    """Gauss-Newton incremental adjoint: the ``lambda * v_tilde`` source is dropped.

    ``v_tilde`` and ``lam`` are accepted for signature parity with the full
    Newton system and are unused.
    """
    del v_tilde, lam
    return SemiLagrangian(v, grid, continuity=continuity).backward(m_tilde_final)


def compute_flow_map(v: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Composition of the per-step departure maps: m(1)(x) = m0(y(x)).

    Returned unwrapped, shape (2, n1, n2).
    """
    op = SemiLagrangian(v, grid)
    x = grid.coords.reshape(2, -1)
    step = op.X - x
    disp = np.zeros_like(step)
    for _ in range(grid.nt):
        c = G.spline_coefficients(disp.reshape(2, *grid.shape), grid).reshape(2, -1)
        disp = step + np.stack([op.BX @ c[0], op.BX @ c[1]])
    return (x + disp).reshape(2, *grid.shape)


def det_deformation_gradient(y: np.ndarray, grid: GridSpec) -> np.ndarray:
    u = y - grid.coords
    du = G.spectral_gradient(u, grid)  # du[c, d] = d u_c / d x_d
    return (1 + du[0, 0]) * (1 + du[1, 1]) - du[0, 1] * du[1, 0]
