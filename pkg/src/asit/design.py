"""Spectral design analysis: energy concentration, bandwidth ratio and the
de-correlation distance design curve."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .grid import ComplexField2D, fft2, radial_frequency

__all__ = [
    "Q_THRESHOLD",
    "SpectralReport",
    "concentration_q",
    "effective_bandwidth",
    "spectral_report",
    "bwr",
    "decorrelation_distance",
    "design_curve",
    "design_curve_csv",
]

Q_THRESHOLD = 0.99

# relative slack for comparing sampled |f| with bin edges
_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class SpectralReport:
    f_na: float
    f_bwr: float
    bwr: float
    z_d: float
    q_profile: list  # (bin upper edge in cycles/m, cumulative q)


def _power(field: ComplexField2D) -> np.ndarray:
    return np.abs(fft2(field)) ** 2


def concentration_q(field: ComplexField2D, f: float, f_na: float) -> float:
    """Fraction of the in-NA spectral energy lying within radius ``f``."""
    if not 0 <= f <= f_na * (1 + _EDGE_TOL):
        raise ValueError(f"need 0 <= f <= f_na, got f={f}, f_na={f_na}")
    power = _power(field)
    r = radial_frequency(field.grid)
    inside_na = r <= f_na * (1 + _EDGE_TOL)
    total = power[inside_na].sum()
    if not total > 0:
        raise ValueError("field has no spectral energy inside the NA disk")
    return float(power[inside_na & (r <= f * (1 + _EDGE_TOL))].sum() / total)


def _bin_profile(field: ComplexField2D, f_na: float):
    grid = field.grid
    power = _power(field)
    r = radial_frequency(grid) / grid.df
    inside_na = r <= (f_na / grid.df) * (1 + _EDGE_TOL)
    total = power[inside_na].sum()
    if not total > 0:
        raise ValueError("field has no spectral energy inside the NA disk")
    bins = np.maximum(1, np.ceil(r[inside_na] - _EDGE_TOL)).astype(np.int64)
    per_bin = np.bincount(bins, weights=power[inside_na])
    q = np.cumsum(per_bin[1:]) / total
    edges = np.arange(1, len(per_bin)) * grid.df
    return edges, q


def effective_bandwidth(field: ComplexField2D, f_na: float,
                        threshold: float = Q_THRESHOLD) -> tuple[float, float]:
    """Return ``(f_bwr, bwr)``.

    Radial bins have width 1/(nx*dx) and are represented by their upper edge;
    f_bwr is the edge of the first bin where the cumulative concentration
    reaches ``threshold``.  f_bwr is capped at ``f_na``.
    """
    edges, q = _bin_profile(field, f_na)
    # float cumsum can land a hair under 1 at the last bin
    hit = np.flatnonzero(q >= threshold - 1e-12)
    f_bwr = float(edges[hit[0]]) if hit.size else float(edges[-1])
    f_bwr = min(f_bwr, f_na)
    return f_bwr, f_bwr / f_na


def bwr(field: ComplexField2D, na: float, wavelength: float,
        threshold: float = Q_THRESHOLD) -> float:
    """Bandwidth ratio of ``field`` against the detection NA."""
    return effective_bandwidth(field, na / wavelength, threshold)[1]


def spectral_report(field: ComplexField2D, na: float, wavelength: float,
                    threshold: float = Q_THRESHOLD) -> SpectralReport:
    f_na = na / wavelength
    edges, q = _bin_profile(field, f_na)
    f_bwr, ratio = effective_bandwidth(field, f_na, threshold)
    z_d = decorrelation_distance(ratio, na, wavelength) if ratio > 0 else float("inf")
    return SpectralReport(f_na, f_bwr, ratio, z_d, list(zip(edges.tolist(), q.tolist())))


def decorrelation_distance(bwr: float, na: float, wavelength: float) -> float:
    """z_d = wavelength / (na * bwr)**2, in meters."""
    if not bwr > 0:
        raise ValueError("bwr must be positive (zero bandwidth never de-correlates)")
    if not na > 0:
        raise ValueError("na must be positive")
    return wavelength / (na * bwr) ** 2


def design_curve(na: float, wavelength: float, bwr_samples=None) -> list[tuple[float, float]]:
    """Tabulate (bwr, z_d) for each sample in (0, 1]."""
    if bwr_samples is None:
        bwr_samples = np.round(np.arange(0.05, 1.0001, 0.01), 4)
    rows = []
    for b in bwr_samples:
        b = float(b)
        if not 0 < b <= 1:
            raise ValueError(f"bwr samples must lie in (0, 1], got {b}")
        rows.append((b, decorrelation_distance(b, na, wavelength)))
    return rows


def design_curve_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bwr", "z_d_m"])
    for b, z in rows:
        writer.writerow([repr(b), repr(z)])
    return buf.getvalue()
