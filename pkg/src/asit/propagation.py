"""Angular spectrum free-space propagation and NA band-limiting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from . import grid as _grid
from .grid import ComplexField2D, Grid2D, radial_frequency

__all__ = [
    "PropagationContext",
    "propagate",
    "adjoint_propagate",
    "bandlimit",
    "disk_mask",
]

log = logging.getLogger(__name__)


@dataclass(eq=False)
class PropagationContext:
    """Wavelength and grid shared by all free-space operators.

    Evanescent spectral components are always zeroed.  Transfer functions are
    cached per propagation distance.
    """

    wavelength: float
    grid: Grid2D
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        k = self.k
        kf2 = (2 * np.pi * radial_frequency(self.grid)) ** 2
        self.propagating = kf2 <= k * k
        self.alpha = np.sqrt(np.where(self.propagating, k * k - kf2, 0.0))

    @property
    def k(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def alias_safe_distance(self) -> float:
        return self.grid.nx * self.grid.dx ** 2 / self.wavelength

    def transfer(self, z: float) -> np.ndarray:
        """exp(i*alpha*z) on the propagating disk, zero elsewhere."""
        z = float(z)
        H = self._cache.get(z)
        if H is None:
            if abs(z) > self.alias_safe_distance:
                log.warning(
                    "propagation distance %.3g m exceeds the aliasing-safe distance %.3g m",
                    z, self.alias_safe_distance,
                )
            H = np.where(self.propagating, np.exp(1j * self.alpha * z), 0.0)
            H.setflags(write=False)
            self._cache[z] = H
        return H

    def lowpass(self, f_cut: float) -> np.ndarray:
        key = ("lowpass", float(f_cut))
        mask = self._cache.get(key)
        if mask is None:
            mask = disk_mask(self.grid, f_cut)
            mask.setflags(write=False)
            self._cache[key] = mask
        return mask

    # raw-array kernels used by the forward model and the gradient
    def apply(self, values: np.ndarray, H: np.ndarray) -> np.ndarray:
        w = _grid.get_threads()
        return scipy.fft.ifft2(scipy.fft.fft2(values, workers=w) * H, workers=w)


def disk_mask(grid: Grid2D, f_cut: float) -> np.ndarray:
    """Boolean mask of the closed disk |f| <= f_cut."""
    if not f_cut > 0:
        raise ValueError(f"cutoff frequency must be positive, got {f_cut}")
    return radial_frequency(grid) <= f_cut


def _check(field: ComplexField2D, ctx: PropagationContext) -> None:
    if field.grid != ctx.grid:
        raise ValueError("field grid does not match propagation context grid")


def propagate(field: ComplexField2D, z: float, ctx: PropagationContext) -> ComplexField2D:
    """Propagate ``field`` by ``z`` meters (negative z back-propagates)."""
    _check(field, ctx)
    return field.with_values(ctx.apply(field.values, ctx.transfer(z)))


def adjoint_propagate(field: ComplexField2D, z: float, ctx: PropagationContext) -> ComplexField2D:
    """Adjoint of :func:`propagate` under the standard complex inner product."""
    _check(field, ctx)
    return field.with_values(ctx.apply(field.values, np.conj(ctx.transfer(z))))


def bandlimit(field: ComplexField2D, f_cut: float) -> ComplexField2D:
    """Zero every spectral component with |f| > f_cut (the disk edge is kept)."""
    mask = disk_mask(field.grid, f_cut)
    spectrum = _grid.fft2(field) * mask
    return field.with_values(_grid.ifft2(spectrum))
