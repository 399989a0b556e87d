"""Sampled complex fields, their frequency grids and the project FFT convention.

FFT convention (used by every module): the forward transform is unnormalized,
the inverse carries the 1/(nx*ny) factor.  Arrays are stored row-major with
shape ``(ny, nx)``: y is the outer (row) axis, x the inner (column) axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

__all__ = [
    "Grid2D",
    "ComplexField2D",
    "fft2",
    "ifft2",
    "radial_frequency",
    "set_threads",
    "get_threads",
]

_WORKERS = 1


def set_threads(n: int) -> None:
    """Set the number of FFT worker threads used project-wide."""
    global _WORKERS
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    _WORKERS = int(n)


def get_threads() -> int:
    return _WORKERS


@dataclass(frozen=True)
class Grid2D:
    """Uniform lateral sampling grid.

    Parameters
    ----------
    nx, ny : int
        Pixel counts along x and y.
    dx, dy : float
        Pixel pitch in meters.
    """

    nx: int
    ny: int
    dx: float
    dy: float

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("pixel counts must be integers")
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.nx}x{self.ny}")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError(f"pixel pitch must be positive, got dx={self.dx}, dy={self.dy}")

    @classmethod
    def square(cls, n: int = 200, pitch: float = 1e-6) -> "Grid2D":
        return cls(n, n, pitch, pitch)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @cached_property
    def fx(self) -> np.ndarray:
        """Frequency samples along x in cycles/m, standard DFT ordering."""
        return np.fft.fftfreq(self.nx, d=self.dx)

    @cached_property
    def fy(self) -> np.ndarray:
        return np.fft.fftfreq(self.ny, d=self.dy)

    @property
    def df(self) -> float:
        """Fundamental frequency 1/(nx*dx) (the radial bin width)."""
        return 1.0 / (self.nx * self.dx)

    @property
    def nyquist(self) -> float:
        return 0.5 / max(self.dx, self.dy)


@dataclass(frozen=True, eq=False)
class ComplexField2D:
    """Complex scalar field sampled on a :class:`Grid2D`."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray) -> "ComplexField2D":
        return ComplexField2D(self.grid, values)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


def _as_array(field) -> np.ndarray:
    if isinstance(field, ComplexField2D):
        return field.values
    return np.asarray(field, dtype=np.complex128)


def fft2(field) -> np.ndarray:
    """Unnormalized forward 2D DFT of a field (or a raw array).

    Raises ValueError on non-finite input.
    """
    values = _as_array(field)
    if not np.all(np.isfinite(values)):
        raise ValueError("fft2: input contains non-finite values")
    return scipy.fft.fft2(values, workers=_WORKERS)


def ifft2(spectrum: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2` (carries the 1/(nx*ny) factor)."""
    spectrum = np.asarray(spectrum)
    if not np.all(np.isfinite(spectrum)):
        raise ValueError("ifft2: input contains non-finite values")
    return scipy.fft.ifft2(spectrum, workers=_WORKERS)


def radial_frequency(grid: Grid2D) -> np.ndarray:
    """|f| = sqrt(fx^2 + fy^2) in cycles/m, shape ``(ny, nx)``."""
    return np.sqrt(grid.fx[np.newaxis, :] ** 2 + grid.fy[:, np.newaxis] ** 2)
