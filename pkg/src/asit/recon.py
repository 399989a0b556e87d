"""TV-regularized alternating-minimization reconstruction.

Each outer iteration reduces the data misfit C1 by sequential per-illumination
gradient steps with a backtracking (Armijo) line search, then runs K
normalized steepest-descent steps on the total variation C2 with a step length
proportional to the data-step distance d1.  beta is shrunk whenever the TV
step moves further than the data step (d1 < d2).

The C1 gradient is an analytic adjoint-state computation through the
multi-slice model.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .forward import MeasurementSet, msbp_forward_array
from .illumination import IlluminationSet
from .metrics import relative_error
from .propagation import PropagationContext
from .scene import RIVolume

__all__ = [
    "SolverConfig",
    "SolverState",
    "SolverDivergence",
    "LOG_HEADER",
    "cost_c1",
    "cost_c1l",
    "grad_c1_slicewise",
    "cost_c2_tv",
    "smoothed_tv",
    "grad_c2_tv",
    "reduce_c1_step",
    "reduce_c2_step",
    "solve",
]

log = logging.getLogger(__name__)

LOG_HEADER = ("iter", "c1", "c2", "d1", "d2", "beta", "e_percent")


class SolverDivergence(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    outer_iterations: int = 100
    tv_subiterations: int = 50
    beta: float = 0.4
    beta_shrink: float = 0.95
    tv_epsilon: float = 1e-12
    armijo_c: float = 1e-4
    ls_shrink: float = 0.5
    ls_max: int = 30
    initial_max_change: float = 0.01
    clamp_to_medium: bool = False
    divergence_factor: float = 10.0
    init: RIVolume | None = None

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0 < self.beta_shrink <= 1:
            raise ValueError("beta_shrink must lie in (0, 1]")
        for name in ("outer_iterations", "tv_subiterations", "ls_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.tv_epsilon > 0:
            raise ValueError("tv_epsilon must be positive")
        if not 0 < self.ls_shrink < 1:
            raise ValueError("ls_shrink must lie in (0, 1)")


@dataclass(eq=False)
class SolverState:
    estimate: RIVolume
    beta: float
    steps: dict = field(default_factory=dict)
    log: list = field(default_factory=list)
    c1_trace: list = field(default_factory=list)  # (before, after) per reduce_c1_step
    iteration_seconds: list = field(default_factory=list)
    zero_steps: int = 0

    @property
    def iterations(self) -> int:
        return len(self.log)


# ---------------------------------------------------------------------------
# data term

class _Model:
    """Cached per-geometry quantities for repeated C1 evaluations."""

    def __init__(self, volume: RIVolume, measurements: MeasurementSet, ctx: PropagationContext):
        if volume.grid != ctx.grid:
            raise ValueError("estimate grid does not match propagation context grid")
        if measurements.delta_z != volume.delta_z or measurements.detector_gap != volume.detector_gap:
            raise ValueError("estimate geometry (delta_z, detector_gap) does not match the measurements")
        if measurements.wavelength != ctx.wavelength:
            raise ValueError("measurement wavelength does not match propagation context")
        if measurements.n_slices and measurements.n_slices != volume.n_slices:
            raise ValueError("estimate slice count does not match the measurements")
        for f in measurements.fields:
            if f.grid != volume.grid:
                raise ValueError("measurement grid does not match the estimate grid")
        self.ctx = ctx
        self.delta_z = volume.delta_z
        self.gap = volume.detector_gap
        self.n_medium = volume.n_medium
        self.f_na = measurements.detector.f_na(ctx.wavelength)
        self.scale = ctx.k * volume.delta_z

    def trans(self, slices: np.ndarray) -> np.ndarray:
        return np.exp(1j * self.scale * (slices - self.n_medium))

    def cost(self, slices, data, illum) -> float:
        out = msbp_forward_array(self.trans(slices), illum, self.delta_z, self.gap,
                                 self.ctx, self.f_na)
        return float(np.sum(np.abs(out - data) ** 2))

    def grad(self, slices, data, illum):
        ctx = self.ctx
        trans = self.trans(slices)
        out, exits = msbp_forward_array(trans, illum, self.delta_z, self.gap, ctx,
                                        self.f_na, keep=True)
        r = out - data
        cost = float(np.sum(np.abs(r) ** 2))
        H_dz_adj = np.conj(ctx.transfer(self.delta_z))
        w = ctx.apply(r, np.conj(ctx.transfer(self.gap)) * ctx.lowpass(self.f_na))
        g = np.empty(slices.shape, dtype=np.float64)
        n = slices.shape[0]
        for j in range(n - 1, -1, -1):
            # dC/dn_j = 2 Re[conj(w_j) * i*k*dz*v_j]
            g[j] = 2.0 * self.scale * np.imag(w * np.conj(exits[j]))
            if j > 0:
                w = ctx.apply(np.conj(trans[j]) * w, H_dz_adj)
        return cost, g


def _fields(items):
    if isinstance(items, IlluminationSet):
        return [f.values for f in items.fields]
    if isinstance(items, MeasurementSet):
        return [f.values for f in items.fields]
    return [getattr(f, "values", f) for f in items]


def cost_c1l(estimate: RIVolume, measurement, illumination, ctx: PropagationContext,
             measurements: MeasurementSet) -> float:
    model = _Model(estimate, measurements, ctx)
    return model.cost(estimate.slices, measurement.values, illumination.values)


def cost_c1(estimate: RIVolume, measurements: MeasurementSet, illuminations,
            ctx: PropagationContext) -> tuple[float, list]:
    """Sum over illuminations of the squared L2 misfit at the detector."""
    model = _Model(estimate, measurements, ctx)
    illum = _fields(illuminations)
    if len(illum) != len(measurements.fields):
        raise ValueError("number of illuminations does not match number of measurements")
    per = [model.cost(estimate.slices, d, u) for d, u in zip(_fields(measurements), illum)]
    return float(sum(per)), per


def grad_c1_slicewise(estimate: RIVolume, measurement, illumination, ctx: PropagationContext,
                      measurements: MeasurementSet) -> np.ndarray:
    """Gradient of one illumination's misfit with respect to every voxel.

    ``measurements`` supplies the detector and geometry; ``measurement`` and
    ``illumination`` are the single field pair for this illumination.
    Returns a real array of shape ``(N, ny, nx)``.
    """
    model = _Model(estimate, measurements, ctx)
    return model.grad(estimate.slices, getattr(measurement, "values", measurement),
                      getattr(illumination, "values", illumination))[1]


# ---------------------------------------------------------------------------
# total variation

def _diffs(n: np.ndarray):
    """Forward differences along z, y, x with a zero difference at the far edge."""
    gz = np.zeros_like(n)
    gy = np.zeros_like(n)
    gx = np.zeros_like(n)
    gz[:-1] = n[1:] - n[:-1]
    gy[:, :-1] = n[:, 1:] - n[:, :-1]
    gx[:, :, :-1] = n[:, :, 1:] - n[:, :, :-1]
    return gz, gy, gx


def _slices(volume) -> np.ndarray:
    return volume.slices if isinstance(volume, RIVolume) else np.asarray(volume, dtype=np.float64)


def cost_c2_tv(estimate) -> float:
    """Isotropic total variation (unsmoothed)."""
    gz, gy, gx = _diffs(_slices(estimate))
    return float(np.sum(np.sqrt(gz ** 2 + gy ** 2 + gx ** 2)))


def smoothed_tv(estimate, tv_epsilon: float) -> float:
    gz, gy, gx = _diffs(_slices(estimate))
    return float(np.sum(np.sqrt(gz ** 2 + gy ** 2 + gx ** 2 + tv_epsilon)))


def grad_c2_tv(estimate, tv_epsilon: float = 1e-12) -> np.ndarray:
    """Gradient of sum(sqrt(|grad n|^2 + tv_epsilon))."""
    if not tv_epsilon > 0:
        raise ValueError("tv_epsilon must be positive")
    gz, gy, gx = _diffs(_slices(estimate))
    s = np.sqrt(gz ** 2 + gy ** 2 + gx ** 2 + tv_epsilon)
    pz, py, px = gz / s, gy / s, gx / s
    # adjoint of the forward difference: (D^T p)[i] = p[i-1] - p[i]
    out = -(pz + py + px)
    out[1:] += pz[:-1]
    out[:, 1:] += py[:, :-1]
    out[:, :, 1:] += px[:, :, :-1]
    return out


# ---------------------------------------------------------------------------
# alternating steps

def reduce_c1_step(state: SolverState, measurements: MeasurementSet, illuminations,
                   ctx: PropagationContext, config: SolverConfig, model: _Model | None = None):
    """Sequential line-searched gradient steps over all illuminations.

    Returns ``(state, d1)``; ``state.estimate`` is replaced in place.
    """
    model = model or _Model(state.estimate, measurements, ctx)
    n0 = state.estimate.slices
    n = n0.copy()
    illum = _fields(illuminations)
    data = _fields(measurements)
    before = after = 0.0
    for l, (d, u) in enumerate(zip(data, illum)):
        c0, g = model.grad(n, d, u)
        before += c0
        gn2 = float(np.sum(g * g))
        gmax = float(np.max(np.abs(g)))
        if gn2 == 0.0 or gmax == 0.0:
            after += c0
            continue
        prev = state.steps.get(l)
        t = 2.0 * prev if prev else config.initial_max_change / gmax
        accepted = 0.0
        c_new = c0
        for _ in range(config.ls_max + 1):
            trial = n - t * g
            if config.clamp_to_medium:
                np.maximum(trial, model.n_medium, out=trial)
            c_new = model.cost(trial, d, u)
            if c_new <= c0 - config.armijo_c * t * gn2:
                accepted = t
                n = trial
                break
            t *= config.ls_shrink
        if accepted == 0.0:
            log.warning("line search for illumination %d found no acceptable step", l)
            state.zero_steps += 1
            c_new = c0
            # keep the old memory so the next attempt starts from a sensible scale
            state.steps[l] = state.steps.get(l) or t
        else:
            state.steps[l] = accepted
        after += c_new
    state.c1_trace.append((before, after))
    state.estimate = state.estimate.with_slices(n)
    return state, float(np.linalg.norm(n - n0))


def reduce_c2_step(state: SolverState, d1: float, config: SolverConfig):
    """K normalized TV descent steps of length beta*d1.  Returns ``(state, d2)``."""
    if d1 < 0:
        raise ValueError("d1 must be non-negative")
    if d1 == 0:
        return state, 0.0
    n_int = state.estimate.slices
    n = n_int.copy()
    step = state.beta * d1
    for _ in range(config.tv_subiterations):
        g = grad_c2_tv(n, config.tv_epsilon)
        gnorm = float(np.linalg.norm(g))
        if gnorm < 1e-30:
            break
        n -= (step / gnorm) * g
    if config.clamp_to_medium:
        np.maximum(n, state.estimate.n_medium, out=n)
    state.estimate = state.estimate.with_slices(n)
    return state, float(np.linalg.norm(n - n_int))


def _initial_state(measurements: MeasurementSet, ctx: PropagationContext,
                   config: SolverConfig, template: RIVolume | None) -> SolverState:
    if config.init is not None:
        est = config.init
    elif template is not None:
        est = RIVolume.uniform(template.grid, template.n_slices, template.delta_z,
                               template.detector_gap, template.n_medium)
    else:
        if not measurements.n_slices:
            raise ValueError("measurements do not record the slice count; pass a template volume")
        est = RIVolume.uniform(ctx.grid, measurements.n_slices, measurements.delta_z,
                               measurements.detector_gap, measurements.n_medium)
    return SolverState(estimate=est, beta=config.beta)


def solve(measurements: MeasurementSet, illuminations, ctx: PropagationContext,
          config: SolverConfig = SolverConfig(), ground_truth: RIVolume | None = None,
          template: RIVolume | None = None, callback=None) -> SolverState:
    """Run ``config.outer_iterations`` alternating C1/TV iterations.

    The estimate starts uniform at the medium index unless ``config.init`` is
    given.  Log rows are ``(iter, c1, c2, d1, d2, beta, e_percent)`` where
    beta is the value used in that iteration and e_percent is NaN without a
    ground truth.
    """
    state = _initial_state(measurements, ctx, config, template or ground_truth)
    model = _Model(state.estimate, measurements, ctx)
    illum = _fields(illuminations)
    if len(illum) != len(measurements.fields):
        raise ValueError("number of illuminations does not match number of measurements")
    c1_initial = None
    for m in range(config.outer_iterations):
        tic = time.perf_counter()
        state, d1 = reduce_c1_step(state, measurements, illum, ctx, config, model)
        if c1_initial is None:
            c1_initial = state.c1_trace[0][0]
        state, d2 = reduce_c2_step(state, d1, config)
        beta_used = state.beta
        if d1 < d2:
            state.beta *= config.beta_shrink
        slices = state.estimate.slices
        if slices.dtype != np.float64 or not np.all(np.isfinite(slices)):
            raise SolverDivergence(f"estimate became non-real or non-finite at iteration {m}")
        c1 = sum(model.cost(slices, d, u) for d, u in zip(_fields(measurements), illum))
        if c1_initial > 0 and c1 > config.divergence_factor * c1_initial:
            raise SolverDivergence(
                f"C1 grew to {c1:.4g}, more than {config.divergence_factor}x its initial "
                f"value {c1_initial:.4g}, at iteration {m}"
            )
        e = relative_error(state.estimate, ground_truth) if ground_truth is not None else float("nan")
        row = (m, c1, cost_c2_tv(slices), d1, d2, beta_used, e)
        state.log.append(row)
        state.iteration_seconds.append(time.perf_counter() - tic)
        if callback is not None:
            callback(state)
    return state
