"""Axial structured illumination tomography: multi-slice simulation and
TV-regularized refractive-index reconstruction."""

from .grid import ComplexField2D, Grid2D, fft2, ifft2, radial_frequency
from .propagation import PropagationContext, adjoint_propagate, bandlimit, propagate
from .scene import RIVolume, phantom_letters, transmission
from .illumination import IlluminationSpec, plane_wave, speckle_illumination
from .forward import DetectorModel, MeasurementSet, acquire, detect, msbp_forward
from .design import (concentration_q, decorrelation_distance, design_curve,
                     effective_bandwidth)
from .recon import SolverConfig, SolverState, solve
from .metrics import crosstalk_index, relative_error

__version__ = "0.1.0"

__all__ = [
    "ComplexField2D", "Grid2D", "fft2", "ifft2", "radial_frequency",
    "PropagationContext", "adjoint_propagate", "bandlimit", "propagate",
    "RIVolume", "phantom_letters", "transmission",
    "IlluminationSpec", "plane_wave", "speckle_illumination",
    "DetectorModel", "MeasurementSet", "acquire", "detect", "msbp_forward",
    "concentration_q", "decorrelation_distance", "design_curve", "effective_bandwidth",
    "SolverConfig", "SolverState", "solve",
    "crosstalk_index", "relative_error",
]
