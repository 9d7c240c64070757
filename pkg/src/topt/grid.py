"""Periodic pseudo-spectral grid on [0, 2*pi)^2.

Fields are plain numpy arrays: a scalar field has shape ``(n1, n2)``, a vector
field ``(2, n1, n2)`` and a time series ``(n_t + 1, n1, n2)``.  Axis 0 is x1.
All spectral operators accept arbitrary leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class GridSpec:
    n1: int
    n2: int
    nt: int = 4

    def __post_init__(self):
        for n in (self.n1, self.n2):
            if n < 4 or n % 2:
                raise ValueError(f"grid sizes must be even and >= 4, got {n}")
        if self.nt < 1:
            raise ValueError("nt must be >= 1")

    @classmethod
    def square(cls, n: int, nt: int = 4) -> "GridSpec":
        return cls(n, n, nt)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    @property
    def h(self) -> tuple[float, float]:
        return (TWO_PI / self.n1, TWO_PI / self.n2)

    @property
    def ht(self) -> float:
        return 1.0 / self.nt

    @property
    def cell_area(self) -> float:
        return self.h[0] * self.h[1]

    def with_nt(self, nt: int) -> "GridSpec":
        return GridSpec(self.n1, self.n2, nt)

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape (2, n1, n2)."""
        x1 = np.arange(self.n1) * self.h[0]
        x2 = np.arange(self.n2) * self.h[1]
        return np.stack(np.meshgrid(x1, x2, indexing="ij"))

    # wavenumbers on the rfft2 half-plane layout, shape (n1, n2 // 2 + 1)
    @cached_property
    def _k(self) -> tuple[np.ndarray, np.ndarray]:
        k1 = np.fft.fftfreq(self.n1, 1.0 / self.n1)
        k2 = np.fft.rfftfreq(self.n2, 1.0 / self.n2)
        return np.meshgrid(k1, k2, indexing="ij")

    @property
    def k1(self) -> np.ndarray:
        return self._k[0]

    @property
    def k2(self) -> np.ndarray:
        return self._k[1]

    @cached_property
    def ksq(self) -> np.ndarray:
        return self.k1**2 + self.k2**2

    @cached_property
    def dk(self) -> tuple[np.ndarray, np.ndarray]:
        """Wavenumbers for odd derivatives, Nyquist entries set to zero."""
        d1 = self.k1.copy()
        d1[np.abs(d1) == self.n1 // 2] = 0.0
        d2 = self.k2.copy()
        d2[np.abs(d2) == self.n2 // 2] = 0.0
        return d1, d2

    @cached_property
    def spline_symbol(self) -> np.ndarray:
        """Fourier symbol of cubic B-spline sampling, (4 + 2 cos)/6 per axis."""
        s1 = (4.0 + 2.0 * np.cos(TWO_PI * self.k1 / self.n1)) / 6.0
        s2 = (4.0 + 2.0 * np.cos(TWO_PI * self.k2 / self.n2)) / 6.0
        return s1 * s2


def fft(f: np.ndarray) -> np.ndarray:
    return np.fft.rfft2(f, axes=(-2, -1))


def ifft(fh: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.fft.irfft2(fh, s=grid.shape, axes=(-2, -1))


def apply_multiplier(f: np.ndarray, mult: np.ndarray, grid: GridSpec) -> np.ndarray:
    return ifft(fft(f) * mult, grid)


def inner(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> float:
    """Grid L2 inner product with uniform cell-area weights."""
    return float(np.vdot(a, b).real) * grid.cell_area


def norm(a: np.ndarray, grid: GridSpec) -> float:
    return np.sqrt(inner(a, a, grid))


# ---------------------------------------------------------------------------
# differential operators


def spectral_gradient(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    fh = fft(f)
    d1, d2 = grid.dk
    return np.stack([ifft(1j * d1 * fh, grid), ifft(1j * d2 * fh, grid)], axis=-3)


def spectral_divergence(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    d1, d2 = grid.dk
    uh = fft(u)
    return ifft(1j * d1 * uh[..., 0, :, :] + 1j * d2 * uh[..., 1, :, :], grid)


def laplacian(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    return apply_multiplier(f, -grid.ksq, grid)


def regularization_multiplier(p: int, grid: GridSpec) -> np.ndarray:
    """Symbol |k|^(2p) of the H^p seminorm operator (p=2 biharmonic, p=3 triharmonic)."""
    if p not in (2, 3):
        raise ValueError(f"unsupported regularization order {p}")
    return grid.ksq**p


def _kernel_fixed(p: int, grid: GridSpec) -> np.ndarray:
    mu = regularization_multiplier(p, grid)
    return np.where(mu == 0.0, 1.0, mu)


def apply_regularization(v: np.ndarray, alpha: float, p: int, grid: GridSpec) -> np.ndarray:
    """alpha * L v (kernel untouched)."""
    return apply_multiplier(v, alpha * regularization_multiplier(p, grid), grid)


def apply_inverse_regularization(g: np.ndarray, alpha: float, p: int, grid: GridSpec) -> np.ndarray:
    """(alpha L)^-1 g with zero entries of L replaced by one."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return apply_multiplier(g, 1.0 / (alpha * _kernel_fixed(p, grid)), grid)


def apply_inverse_sqrt_regularization(g: np.ndarray, alpha: float, p: int, grid: GridSpec) -> np.ndarray:
    """(alpha L)^-1/2 g, same kernel treatment as the inverse."""
    return apply_multiplier(g, 1.0 / np.sqrt(alpha * _kernel_fixed(p, grid)), grid)


def leray_project(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Spectral projection onto divergence-free fields."""
    d1, d2 = grid.dk
    dsq = d1**2 + d2**2
    inv = np.divide(1.0, dsq, out=np.zeros_like(dsq), where=dsq > 0)
    uh = fft(u)
    u1, u2 = uh[..., 0, :, :], uh[..., 1, :, :]
    proj = (d1 * u1 + d2 * u2) * inv
    return np.stack([ifft(u1 - d1 * proj, grid), ifft(u2 - d2 * proj, grid)], axis=-3)


def gaussian_smooth(f: np.ndarray, gamma: float, grid: GridSpec) -> np.ndarray:
    """Gaussian filter with per-axis standard deviation gamma * h_i."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if gamma == 0:
        return np.array(f, dtype=float, copy=True)
    s1, s2 = gamma * grid.h[0], gamma * grid.h[1]
    mult = np.exp(-0.5 * (s1**2 * grid.k1**2 + s2**2 * grid.k2**2))
    return apply_multiplier(f, mult, grid)


# ---------------------------------------------------------------------------
# restriction / prolongation (Fourier truncation / zero padding)


def _check_pair(coarse: GridSpec, fine: GridSpec):
    if fine.n1 != 2 * coarse.n1 or fine.n2 != 2 * coarse.n2:
        raise ValueError(f"incompatible grids {fine.shape} -> {coarse.shape}")


def _coarse_rows(coarse: GridSpec, fine: GridSpec) -> np.ndarray:
    # fine rfft row indices holding the coarse non-Nyquist wavenumbers
    k = np.fft.fftfreq(coarse.n1, 1.0 / coarse.n1).astype(int)
    return np.mod(k, fine.n1)


def _coarse_mask(coarse: GridSpec) -> np.ndarray:
    return (np.abs(coarse.k1) < coarse.n1 // 2) & (np.abs(coarse.k2) < coarse.n2 // 2)


def spectral_restrict(f: np.ndarray, coarse: GridSpec, fine: GridSpec) -> np.ndarray:
    """Keep Fourier modes strictly below the coarse Nyquist frequency."""
    _check_pair(coarse, fine)
    fh = fft(f)
    ch = fh[..., _coarse_rows(coarse, fine), : coarse.n2 // 2 + 1]
    ch = ch * _coarse_mask(coarse) * (coarse.size / fine.size)
    return ifft(ch, coarse)


def spectral_prolong(f: np.ndarray, coarse: GridSpec, fine: GridSpec) -> np.ndarray:
    """Zero-pad the coarse spectrum (coarse Nyquist dropped)."""
    _check_pair(coarse, fine)
    ch = fft(f) * _coarse_mask(coarse) * (fine.size / coarse.size)
    fh = np.zeros(f.shape[:-2] + (fine.n1, fine.n2 // 2 + 1), dtype=complex)
    fh[..., _coarse_rows(coarse, fine), : coarse.n2 // 2 + 1] = ch
    return ifft(fh, fine)


# ---------------------------------------------------------------------------
# periodic cubic B-spline interpolation


def spline_coefficients(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Prefilter so that the B-spline expansion interpolates f at the nodes."""
    return apply_multiplier(f, 1.0 / grid.spline_symbol, grid)


def _bspline_weights(t: np.ndarray, deriv: int) -> np.ndarray:
    if deriv == 0:
        return np.stack([
            (1 - t) ** 3 / 6,
            (3 * t**3 - 6 * t**2 + 4) / 6,
            (-3 * t**3 + 3 * t**2 + 3 * t + 1) / 6,
            t**3 / 6,
        ])
    return np.stack([
        -0.5 * (1 - t) ** 2,
        1.5 * t**2 - 2 * t,
        -1.5 * t**2 + t + 0.5,
        0.5 * t**2,
    ])


def interpolation_matrix(points: np.ndarray, grid: GridSpec, deriv: tuple[int, int] = (0, 0)) -> sp.csr_matrix:
    """Sparse map from spline coefficients (flattened) to values at ``points``.

    ``points`` has shape (2, ...) in physical coordinates; points are wrapped
    periodically. ``deriv`` selects d/dx1 or d/dx2 of the interpolant.
    """
    pts = np.asarray(points, dtype=float).reshape(2, -1)
    m = pts.shape[1]
    u1 = pts[0] / grid.h[0]
    u2 = pts[1] / grid.h[1]
    i1 = np.floor(u1)
    i2 = np.floor(u2)
    w1 = _bspline_weights(u1 - i1, deriv[0])
    w2 = _bspline_weights(u2 - i2, deriv[1])
    if deriv[0]:
        w1 = w1 / grid.h[0]
    if deriv[1]:
        w2 = w2 / grid.h[1]
    off = np.arange(-1, 3)
    r1 = np.mod(i1.astype(np.int64)[None, :] + off[:, None], grid.n1)
    r2 = np.mod(i2.astype(np.int64)[None, :] + off[:, None], grid.n2)
    cols = (r1[:, None, :] * grid.n2 + r2[None, :, :]).reshape(16, m)
    data = (w1[:, None, :] * w2[None, :, :]).reshape(16, m)
    rows = np.broadcast_to(np.arange(m), (16, m))
    return sp.csr_matrix((data.ravel(), (rows.ravel(), cols.ravel())), shape=(m, grid.size))


def interpolate(f: np.ndarray, points: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Evaluate the periodic cubic spline interpolant of ``f`` at ``points``."""
    pts = np.asarray(points, dtype=float)
    mat = interpolation_matrix(pts, grid)
    return (mat @ spline_coefficients(f, grid).ravel()).reshape(pts.shape[1:])
