"""Multi-slice beam propagation forward model, detection noise and acquisition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ComplexField2D
from .illumination import IlluminationSet, rng_for
from .propagation import PropagationContext
from .scene import RIVolume, transmissions

__all__ = [
    "DetectorModel",
    "MeasurementSet",
    "check_geometry",
    "msbp_forward",
    "msbp_forward_array",
    "detect",
    "acquire",
]


@dataclass(frozen=True)
class DetectorModel:
    """Detection NA and photon budget.

    ``photons_per_pixel=None`` means noiseless detection.
    """

    na: float = 0.3
    photons_per_pixel: float | None = 5e4
    noise_seed: int = 0

    def __post_init__(self):
        if not 0 < self.na < 1:
            raise ValueError(f"na must lie in (0, 1), got {self.na}")
        if self.photons_per_pixel is not None and not self.photons_per_pixel > 0:
            raise ValueError("photons_per_pixel must be positive when noise is enabled")

    @property
    def noiseless(self) -> bool:
        return self.photons_per_pixel is None

    @property
    def noise_std(self) -> float:
        """Per-component (real or imaginary) noise standard deviation."""
        return 0.0 if self.noiseless else 1.0 / np.sqrt(2.0 * self.photons_per_pixel)

    def f_na(self, wavelength: float) -> float:
        return self.na / wavelength


@dataclass(eq=False)
class MeasurementSet:
    fields: list
    detector: DetectorModel
    delta_z: float
    detector_gap: float
    wavelength: float
    n_slices: int = 0
    n_medium: float = 0.0

    def __len__(self):
        return len(self.fields)


def check_geometry(volume: RIVolume, ctx: PropagationContext, detector: DetectorModel) -> None:
    if volume.grid != ctx.grid:
        raise ValueError("volume grid does not match propagation context grid")
    if detector.f_na(ctx.wavelength) >= ctx.grid.nyquist:
        raise ValueError(
            f"NA cutoff {detector.f_na(ctx.wavelength):.4g} cycles/m is not below the grid "
            f"Nyquist frequency {ctx.grid.nyquist:.4g} cycles/m"
        )


def msbp_forward_array(trans: np.ndarray, illum: np.ndarray, delta_z: float,
                       detector_gap: float, ctx: PropagationContext, f_na: float,
                       keep: bool = False):
    """Raw-array MSBP.  With ``keep`` also returns the fields leaving each slice."""
    H_dz = ctx.transfer(delta_z)
    H_out = ctx.transfer(detector_gap) * ctx.lowpass(f_na)
    exits = []
    u = illum
    n = trans.shape[0]
    for j in range(n):
        u = u * trans[j]
        if keep:
            exits.append(u)
        if j < n - 1:
            u = ctx.apply(u, H_dz)
    out = ctx.apply(u, H_out)
    return (out, exits) if keep else out


def msbp_forward(volume: RIVolume, illum: ComplexField2D, ctx: PropagationContext,
                 detector: DetectorModel) -> ComplexField2D:
    """Noiseless field at the detection plane, band-limited to NA/wavelength."""
    check_geometry(volume, ctx, detector)
    if illum.grid != volume.grid:
        raise ValueError("illumination grid does not match volume grid")
    out = msbp_forward_array(transmissions(volume, ctx.wavelength), illum.values,
                             volume.delta_z, volume.detector_gap, ctx,
                             detector.f_na(ctx.wavelength))
    return illum.with_values(out)


def detect(field: ComplexField2D, detector: DetectorModel, index: int = 0) -> ComplexField2D:
    """Add i.i.d. Gaussian noise of std 1/sqrt(2*N0) to real and imaginary parts.

    The noise stream is keyed by ``(detector.noise_seed, index)``.
    """
    if detector.noiseless:
        return field
    rng = rng_for(detector.noise_seed, index)
    noise = rng.standard_normal((2,) + field.grid.shape) * detector.noise_std
    return field.with_values(field.values + noise[0] + 1j * noise[1])


def acquire(volume: RIVolume, illuminations, ctx: PropagationContext,
            detector: DetectorModel) -> MeasurementSet:
    """Forward model plus detection for every illumination."""
    if isinstance(illuminations, IlluminationSet):
        illuminations = illuminations.fields
    fields = [
        detect(msbp_forward(volume, illum, ctx, detector), detector, index=l)
        for l, illum in enumerate(illuminations)
    ]
    return MeasurementSet(fields, detector, volume.delta_z, volume.detector_gap,
                          ctx.wavelength, volume.n_slices, volume.n_medium)
