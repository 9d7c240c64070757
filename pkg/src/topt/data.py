"""Synthetic template/reference pairs, normalization and binary field I/O."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .grid import GridSpec

RECT_CENTER = (np.pi, np.pi)
RECT_HALF_WIDTHS = (0.9, 0.6)
RECT_SHIFT = (0.5, 0.3)
RECT_SCALE = 1.15


class FormatError(ValueError):
    """Malformed or truncated field file."""


class DatasetKind(str, Enum):
    RECT = "rect"
    SINUSOIDAL = "sinusoidal"
    GAUSSIAN = "gaussian"


def normalize(f: np.ndarray) -> np.ndarray:
    """Affine map onto [0, 1]; constant fields map to zero."""
    lo, hi = float(np.min(f)), float(np.max(f))
    if hi == lo:
        return np.zeros_like(f, dtype=float)
    return (f - lo) / (hi - lo)


def _box_profile(n: int, center: float, half_width: float) -> np.ndarray:
    """Fourier partial sum (|k| < n/2) of a periodic 1D box indicator sampled on n points."""
    x = 2 * np.pi * np.arange(n) / n
    k = np.arange(1, n // 2)
    coef = np.sin(k * half_width) / (np.pi * k)
    return half_width / np.pi + 2 * (coef[:, None] * np.cos(k[:, None] * (x[None, :] - center))).sum(axis=0)


def rect_indicator(n: int, center, half_widths) -> np.ndarray:
    """Band-limited rectangle: the exact Fourier series truncated at the grid's Nyquist mode.

    Sampling the series instead of the indicator keeps fields at different
    resolutions consistent under spectral restriction.
    """
    return np.outer(_box_profile(n, center[0], half_widths[0]), _box_profile(n, center[1], half_widths[1]))


def make_rect(n: int, normalized: bool = True) -> tuple[np.ndarray, np.ndarray]:
    GridSpec(n, n)
    m0 = rect_indicator(n, RECT_CENTER, RECT_HALF_WIDTHS)
    c1 = (RECT_CENTER[0] + RECT_SHIFT[0], RECT_CENTER[1] + RECT_SHIFT[1])
    m1 = rect_indicator(n, c1, tuple(RECT_SCALE * h for h in RECT_HALF_WIDTHS))
    if normalized:
        return normalize(m0), normalize(m1)
    return m0, m1


def make_sinusoidal(n: int) -> tuple[np.ndarray, np.ndarray]:
    x1, x2 = GridSpec(n, n).coords
    m0 = 0.5 * (1 + np.sin(x1) * np.sin(x2))
    m1 = 0.5 * (1 + np.sin(x1 + 0.4) * np.sin(x2 - 0.3))
    return m0, m1


def wrapped_gaussian(grid: GridSpec, center, width: float, images: int = 3) -> np.ndarray:
    x1, x2 = grid.coords
    out = np.zeros(grid.shape)
    L = 2 * np.pi
    for a in range(-images, images + 1):
        for b in range(-images, images + 1):
            out += np.exp(-((x1 - center[0] + a * L) ** 2 + (x2 - center[1] + b * L) ** 2) / (2 * width**2))
    return out


def make_gaussian_densities(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Two wrapped Gaussians with unit mass under the cell-area quadrature."""
    grid = GridSpec(n, n)
    p0 = wrapped_gaussian(grid, (np.pi - 0.6, np.pi - 0.4), 0.5)
    p1 = wrapped_gaussian(grid, (np.pi + 0.6, np.pi + 0.4), 0.7)
    return p0 / (grid.cell_area * p0.sum()), p1 / (grid.cell_area * p1.sum())


GENERATORS = {
    DatasetKind.RECT: make_rect,
    DatasetKind.SINUSOIDAL: make_sinusoidal,
    DatasetKind.GAUSSIAN: make_gaussian_densities,
}


@dataclass(frozen=True)
class DatasetSpec:
    kind: DatasetKind
    n: int

    def generate(self) -> tuple[np.ndarray, np.ndarray]:
        return GENERATORS[DatasetKind(self.kind)](self.n)


def make_dataset(kind: str | DatasetKind, n: int) -> tuple[np.ndarray, np.ndarray]:
    return DatasetSpec(DatasetKind(kind), n).generate()


# ---------------------------------------------------------------------------
# binary I/O: 4-byte magic, little-endian u32 dims, little-endian f64 payload


def _payload(f: np.ndarray) -> bytes:
    return np.ascontiguousarray(f, dtype="<f8").tobytes()


def encode_field(f: np.ndarray) -> bytes:
    f = np.asarray(f, dtype=float)
    if f.ndim == 2:
        return b"F2D1" + struct.pack("<II", *f.shape) + _payload(f)
    if f.ndim == 3 and f.shape[0] == 2:
        return b"F2D2" + struct.pack("<II", *f.shape[1:]) + _payload(f)
    raise ValueError(f"unsupported field shape {f.shape}; use encode_series for time series")


def encode_series(m: np.ndarray) -> bytes:
    m = np.asarray(m, dtype=float)
    if m.ndim != 3:
        raise ValueError("time series must have shape (nt+1, n1, n2)")
    return b"F2DT" + struct.pack("<III", m.shape[1], m.shape[2], m.shape[0] - 1) + _payload(m)


def decode_field(buf: bytes, expected_shape: tuple[int, ...] | None = None) -> np.ndarray:
    if len(buf) < 12:
        raise FormatError("file shorter than header")
    magic = buf[:4]
    if magic in (b"F2D1", b"F2D2"):
        n1, n2 = struct.unpack_from("<II", buf, 4)
        off = 12
        shape = (n1, n2) if magic == b"F2D1" else (2, n1, n2)
    elif magic == b"F2DT":
        if len(buf) < 16:
            raise FormatError("file shorter than header")
        n1, n2, nt = struct.unpack_from("<III", buf, 4)
        off = 16
        shape = (nt + 1, n1, n2)
    else:
        raise FormatError(f"bad magic {magic!r}")
    need = off + 8 * int(np.prod(shape))
    if len(buf) != need:
        raise FormatError(f"payload size {len(buf) - off} bytes, expected {need - off} for shape {shape}")
    out = np.frombuffer(buf, dtype="<f8", offset=off).reshape(shape).astype(float)
    if expected_shape is not None and out.shape != tuple(expected_shape):
        raise FormatError(f"dimension mismatch: file has {out.shape}, expected {tuple(expected_shape)}")
    return out


def save_field(path: str | Path, f: np.ndarray, series: bool = False) -> Path:
    path = Path(path)
    path.write_bytes(encode_series(f) if series else encode_field(f))
    return path


def load_field(path: str | Path, expected_shape: tuple[int, ...] | None = None) -> np.ndarray:
    path = Path(path)
    try:
        return decode_field(path.read_bytes(), expected_shape)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def save_pgm(path: str | Path, f: np.ndarray) -> Path:
    """8-bit binary PGM of ``clip(f, 0, 1) * 255``; axis 0 becomes image rows."""
    img = np.round(np.clip(f, 0.0, 1.0) * 255).astype(np.uint8)
    path = Path(path)
    path.write_bytes(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode() + img.tobytes())
    return path
