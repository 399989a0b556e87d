"""Axial illuminations: plane wave and unit-amplitude speckle-phase fields.

Random numbers come from numpy's PCG64 bit generator seeded through
``numpy.random.SeedSequence``; derived streams use ``SeedSequence([seed, ...])``
keys so every illumination is reproducible from its own integer seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import design
from .grid import ComplexField2D, Grid2D, fft2, ifft2
from .propagation import PropagationContext, disk_mask

__all__ = [
    "IlluminationSpec",
    "Illumination",
    "IlluminationSet",
    "TuningError",
    "rng_for",
    "plane_wave",
    "speckle_phase",
    "speckle_illumination",
    "synthesize",
]

log = logging.getLogger(__name__)

BWR_TOLERANCE = 0.05
MAX_BISECTIONS = 40


class TuningError(RuntimeError):
    """Speckle cutoff search failed to reach the target bandwidth ratio."""

    def __init__(self, message, best_bwr):
        super().__init__(f"{message} (best achieved bwr={best_bwr:.4f})")
        self.best_bwr = best_bwr


def rng_for(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


@dataclass(frozen=True)
class IlluminationSpec:
    kind: str
    grid: Grid2D
    target_bwr: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("plane", "speckle"):
            raise ValueError(f"illumination kind must be 'plane' or 'speckle', got {self.kind!r}")
        if self.kind == "speckle":
            if self.target_bwr is None or not 0.05 <= self.target_bwr <= 1.0:
                raise ValueError(f"speckle target_bwr must be in [0.05, 1], got {self.target_bwr}")
            if self.seed is None:
                raise ValueError("speckle illumination needs a seed")


@dataclass(frozen=True, eq=False)
class Illumination:
    """An illumination field together with the metadata it was made from."""

    field: ComplexField2D
    kind: str
    target_bwr: float | None = None
    seed: int | None = None
    achieved_bwr: float | None = None
    cutoff: float | None = None

    def metadata_line(self) -> str:
        def fmt(v):
            return "none" if v is None else repr(v)
        return (f"kind={self.kind} seed={fmt(self.seed)} target_bwr={fmt(self.target_bwr)} "
                f"achieved_bwr={fmt(self.achieved_bwr)}")


@dataclass(eq=False)
class IlluminationSet:
    items: list = field(default_factory=list)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, i):
        return self.items[i]

    @property
    def fields(self) -> list:
        return [it.field for it in self.items]


def plane_wave(grid: Grid2D) -> ComplexField2D:
    return ComplexField2D(grid, np.ones(grid.shape, dtype=np.complex128))


def speckle_phase(grid: Grid2D, seed: int, f_c: float) -> np.ndarray:
    """Low-pass filtered uniform random phase map rescaled to span [0, 2*pi]."""
    phi0 = rng_for(seed).uniform(0.0, 2 * np.pi, size=grid.shape)
    filtered = ifft2(fft2(phi0) * disk_mask(grid, f_c)).real
    span = filtered.max() - filtered.min()
    if span <= 0:
        return np.zeros(grid.shape)
    return 2 * np.pi * (filtered - filtered.min()) / span


def _measure(values, grid, na, wavelength, exit_through):
    f = ComplexField2D(grid, values if exit_through is None else values * exit_through)
    return design.bwr(f, na, wavelength)


def speckle_illumination(spec: IlluminationSpec, ctx: PropagationContext, na: float,
                         exit_through: ComplexField2D | None = None) -> Illumination:
    """Unit-amplitude speckle-phase field tuned to ``spec.target_bwr``.

    The phase-filter cutoff is found by bisection so that the measured bwr
    (of the bare field, or of the field times ``exit_through`` when given,
    e.g. the first slice transmission) lands within +-0.05 of the target.
    """
    if spec.kind != "speckle":
        raise ValueError("speckle_illumination needs a speckle spec")
    grid = spec.grid
    through = None if exit_through is None else exit_through.values
    f_na = na / ctx.wavelength

    def trial(f_c):
        values = np.exp(1j * speckle_phase(grid, spec.seed, f_c))
        return values, _measure(values, grid, na, ctx.wavelength, through)

    target = spec.target_bwr
    lo, hi = grid.df, min(f_na, grid.nyquist)
    best = None
    history = []
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        values, measured = trial(mid)
        for f_prev, b_prev in history:
            if (f_prev < mid and b_prev > measured + 1e-12) or (f_prev > mid and b_prev < measured - 1e-12):
                log.warning("bwr not monotone in cutoff near %.4g cycles/m; widening bracket", mid)
                lo, hi = grid.df, min(2 * f_na, grid.nyquist)
                break
        history.append((mid, measured))
        if best is None or abs(measured - target) < abs(best[1] - target):
            best = (values, measured, mid)
        if abs(measured - target) <= BWR_TOLERANCE * 0.5:
            break
        if measured < target:
            lo = mid
        else:
            hi = mid
    values, measured, f_c = best
    if abs(measured - target) > BWR_TOLERANCE:
        raise TuningError(f"could not reach bwr {target} within +-{BWR_TOLERANCE}", measured)
    return Illumination(ComplexField2D(grid, values), "speckle", target, spec.seed, measured, f_c)


def synthesize(spec: IlluminationSpec, ctx: PropagationContext, na: float,
               exit_through: ComplexField2D | None = None) -> Illumination:
    """Build the illumination described by ``spec``."""
    if spec.kind == "plane":
        f = plane_wave(spec.grid)
        return Illumination(f, "plane", achieved_bwr=design.bwr(
            f if exit_through is None else f.with_values(exit_through.values), na, ctx.wavelength))
    return speckle_illumination(spec, ctx, na, exit_through)
