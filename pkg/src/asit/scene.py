"""Discretized refractive-index volumes, slice transmissions and letter phantoms."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .grid import ComplexField2D, Grid2D

__all__ = [
    "RIVolume",
    "transmission",
    "transmissions",
    "phantom_letters",
    "letter_mask",
    "GLYPHS",
    "N_LETTER",
    "N_MEDIUM",
]

N_LETTER = 1.548
N_MEDIUM = 1.518


@dataclass(frozen=True, eq=False)
class RIVolume:
    """N lumped slices of real refractive index.

    Slice j (0-based array index) sits at z = j * delta_z; the detection plane
    is ``detector_gap`` beyond the last slice.  ``slices`` has shape
    ``(N, ny, nx)``.
    """

    grid: Grid2D
    delta_z: float
    detector_gap: float
    n_medium: float
    slices: np.ndarray

    def __post_init__(self):
        slices = np.asarray(self.slices)
        if np.iscomplexobj(slices):
            raise ValueError("refractive index slices must be real (no absorption)")
        slices = np.array(slices, dtype=np.float64)
        if slices.ndim == 2:
            slices = slices[np.newaxis]
        if slices.ndim != 3 or slices.shape[0] < 1 or slices.shape[1:] != self.grid.shape:
            raise ValueError(
                f"slices must have shape (N, {self.grid.ny}, {self.grid.nx}), got {slices.shape}"
            )
        if not np.all(np.isfinite(slices)):
            raise ValueError("refractive index slices contain non-finite values")
        if slices.shape[0] >= 2 and not self.delta_z > 0:
            raise ValueError(f"delta_z must be positive for multi-slice volumes, got {self.delta_z}")
        if self.delta_z < 0:
            raise ValueError("delta_z must be non-negative")
        if self.detector_gap < 0:
            raise ValueError(f"detector_gap must be >= 0, got {self.detector_gap}")
        object.__setattr__(self, "slices", slices)

    @property
    def n_slices(self) -> int:
        return self.slices.shape[0]

    @property
    def z_positions(self) -> np.ndarray:
        return np.arange(self.n_slices) * self.delta_z

    @property
    def detector_z(self) -> float:
        return (self.n_slices - 1) * self.delta_z + self.detector_gap

    def with_slices(self, slices: np.ndarray) -> "RIVolume":
        return replace(self, slices=slices)

    def same_geometry(self, other: "RIVolume") -> bool:
        return (
            self.grid == other.grid
            and self.slices.shape == other.slices.shape
            and self.delta_z == other.delta_z
            and self.detector_gap == other.detector_gap
            and self.n_medium == other.n_medium
        )

    @classmethod
    def uniform(cls, grid: Grid2D, n_slices: int, delta_z: float, detector_gap: float,
                n_medium: float = N_MEDIUM) -> "RIVolume":
        slices = np.full((n_slices,) + grid.shape, n_medium, dtype=np.float64)
        return cls(grid, delta_z, detector_gap, n_medium, slices)


def _phase(slices: np.ndarray, n_medium: float, delta_z: float, wavelength: float) -> np.ndarray:
    return (2 * np.pi / wavelength) * (slices - n_medium) * delta_z


def transmission(volume: RIVolume, j: int, wavelength: float) -> ComplexField2D:
    """Pure-phase transmission exp(i*phi_j) of slice ``j`` (1-based, 1..N).

    phi_j = (2*pi/wavelength) * (n_j - n_medium) * delta_z; the last slice uses
    the same slab thickness.
    """
    if not 1 <= j <= volume.n_slices:
        raise IndexError(f"slice index {j} out of range 1..{volume.n_slices}")
    phi = _phase(volume.slices[j - 1], volume.n_medium, volume.delta_z, wavelength)
    return ComplexField2D(volume.grid, np.exp(1j * phi))


def transmissions(volume: RIVolume, wavelength: float) -> np.ndarray:
    """All slice transmissions as a raw ``(N, ny, nx)`` complex array."""
    return np.exp(1j * _phase(volume.slices, volume.n_medium, volume.delta_z, wavelength))


# Stroke masks, 20x20, '#' = letter.  Scaled nearest-neighbour onto the grid.
_GLYPH_ART = {
    "A": """
.......######.......
......########......
.....####..####.....
.....###....###.....
....####....####....
....###......###....
...####......####...
...###........###...
...###........###...
..################..
..################..
..################..
..###..........###..
.####..........####.
.###............###.
.###............###.
####............####
###..............###
###..............###
###..............###
""",
    "B": """
##############......
###############.....
###.........####....
###..........###....
###..........###....
###..........###....
###.........####....
###############.....
##############......
###############.....
###.........#####...
###...........####..
###............###..
###............###..
###............###..
###...........####..
###..........####...
################....
###############.....
##############......
""",
    "C": """
......########......
....############....
...#####....#####...
..####........####..
.####..........###..
.###................
####................
###.................
###.................
###.................
###.................
###.................
###.................
####................
.###................
.####..........###..
..####........####..
...#####....#####...
....############....
......########......
""",
    "D": """
#############.......
###############.....
###.........#####...
###...........####..
###............###..
###............####.
###.............###.
###.............###.
###.............###.
###.............###.
###.............###.
###.............###.
###.............###.
###.............###.
###............####.
###............###..
###...........####..
###.........#####...
###############.....
#############.......
""",
}

GLYPHS = {
    name: np.array([[c == "#" for c in row] for row in art.strip().splitlines()], dtype=bool)
    for name, art in _GLYPH_ART.items()
}

LETTER_FRACTION = 0.6


def letter_mask(letter: str, grid: Grid2D) -> np.ndarray:
    """Boolean support of ``letter`` centred on ``grid`` at 60% of its width."""
    try:
        glyph = GLYPHS[letter.upper()]
    except KeyError:
        raise ValueError(f"unsupported glyph {letter!r}; choose from {sorted(GLYPHS)}") from None
    h = int(round(LETTER_FRACTION * grid.ny))
    w = int(round(LETTER_FRACTION * grid.nx))
    rows = (np.arange(h) * glyph.shape[0]) // h
    cols = (np.arange(w) * glyph.shape[1]) // w
    scaled = glyph[np.ix_(rows, cols)]
    mask = np.zeros(grid.shape, dtype=bool)
    y0 = (grid.ny - h) // 2
    x0 = (grid.nx - w) // 2
    mask[y0:y0 + h, x0:x0 + w] = scaled
    return mask


def phantom_letters(letters, grid: Grid2D, delta_z: float, detector_gap: float = 100e-6,
                    n_in: float = N_LETTER, n_medium: float = N_MEDIUM) -> RIVolume:
    """One centred letter per slice: letter pixels ``n_in``, background ``n_medium``."""
    letters = list(letters)
    if not 1 <= len(letters) <= 4:
        raise ValueError(f"phantom needs 1 to 4 letters, got {len(letters)}")
    if grid.nx < 64 or grid.ny < 64:
        raise ValueError("letter phantoms need a grid of at least 64x64")
    slices = np.full((len(letters),) + grid.shape, n_medium, dtype=np.float64)
    for j, letter in enumerate(letters):
        slices[j][letter_mask(letter, grid)] = n_in
    return RIVolume(grid, delta_z, detector_gap, n_medium, slices)
