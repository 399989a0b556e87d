"""Preset end-to-end scenarios and parameter sweeps.

A run directory holds::

    scenario.txt          the resolved scenario (key = value)
    manifest.txt          geometry, detector, seeds and achieved BWRs
    truth.asitvol         ground-truth volume
    illum_XX.asitfld      illuminations (+ illum_XX.meta sidecar)
    meas_XX.asitfld       detected fields
    estimate.asitvol      reconstruction
    iterations.csv        solver log
    report.csv/report.txt evaluation
    images/*.pgm          16-bit slices, phases and magnitudes
    figures/*.png         matplotlib renderings
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import fileio, plotting
from .forward import DetectorModel, MeasurementSet, acquire
from .grid import Grid2D
from .illumination import Illumination, IlluminationSet, IlluminationSpec, synthesize
from .metrics import EvaluationReport, evaluate
from .propagation import PropagationContext
from .recon import LOG_HEADER, SolverConfig, SolverState, solve
from .scene import N_LETTER, N_MEDIUM, RIVolume, phantom_letters, transmission

__all__ = [
    "ScenarioSpec",
    "ScenarioResult",
    "PRESETS",
    "get_preset",
    "derive_seed",
    "build_measurements",
    "run_scenario",
    "sweep",
    "SWEEP_HEADER",
]

log = logging.getLogger(__name__)


def derive_seed(master_seed: int, stream: int, index: int = 0) -> int:
    """Deterministic 32-bit child seed for (master, stream, index)."""
    return int(np.random.SeedSequence([master_seed, stream, index]).generate_state(1)[0])


ILLUMINATION_STREAM = 0
NOISE_STREAM = 1


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "custom"
    phantom: str = "AB"
    delta_z_um: float = 150.0
    detector_gap_um: float = 100.0
    illumination: str = "plane"
    illuminations: int = 1
    bwr: float = 0.6
    bwr_reference: str = "bare"
    na: float = 0.3
    wavelength_nm: float = 650.0
    photons_per_pixel: float | None = 5e4
    grid_n: int = 200
    pixel_um: float = 1.0
    outer_iterations: int = 100
    K: int = 50
    beta: float = 0.4
    beta_shrink: float = 0.95
    tv_epsilon: float = 1e-12
    master_seed: int = 0

    def __post_init__(self):
        if self.bwr_reference not in ("bare", "slice1"):
            raise ValueError("bwr_reference must be 'bare' or 'slice1'")
        if self.illuminations < 1:
            raise ValueError("need at least one illumination")

    @property
    def grid(self) -> Grid2D:
        return Grid2D.square(self.grid_n, self.pixel_um * 1e-6)

    @property
    def wavelength(self) -> float:
        return self.wavelength_nm * 1e-9

    def solver_config(self) -> SolverConfig:
        return SolverConfig(outer_iterations=self.outer_iterations, tv_subiterations=self.K,
                            beta=self.beta, beta_shrink=self.beta_shrink,
                            tv_epsilon=self.tv_epsilon)

    def to_text(self) -> str:
        pairs = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "photons_per_pixel" and v is None:
                v = "noiseless"
            pairs.append((f.name, v))
        return fileio.format_keyvalue(pairs)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ScenarioSpec":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in mapping.items():
            if key not in known:
                raise ValueError(f"unknown scenario key {key!r}")
            default = getattr(cls, key)
            if key == "photons_per_pixel":
                kwargs[key] = None if str(raw).strip().lower() == "noiseless" else float(raw)
            elif isinstance(default, bool):
                kwargs[key] = str(raw).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(raw)
            elif isinstance(default, float):
                kwargs[key] = float(raw)
            else:
                kwargs[key] = str(raw)
        return cls(**kwargs)

    @classmethod
    def from_text(cls, text: str) -> "ScenarioSpec":
        return cls.from_mapping(fileio.parse_keyvalue(text))


PRESETS = {
    "pw-2slice-150": ScenarioSpec(name="pw-2slice-150", phantom="AB", delta_z_um=150.0),
    "pw-2slice-100": ScenarioSpec(name="pw-2slice-100", phantom="AB", delta_z_um=100.0),
    "speckle-2slice-30": ScenarioSpec(name="speckle-2slice-30", phantom="AB", delta_z_um=30.0,
                                      illumination="speckle", bwr=0.6),
    "speckle-2slice-20": ScenarioSpec(name="speckle-2slice-20", phantom="AB", delta_z_um=20.0,
                                      illumination="speckle", bwr=0.6),
    "speckle-2slice-10": ScenarioSpec(name="speckle-2slice-10", phantom="AB", delta_z_um=10.0,
                                      illumination="speckle", bwr=0.6),
    "speckle-3slice-L1": ScenarioSpec(name="speckle-3slice-L1", phantom="ABC", delta_z_um=30.0,
                                      illumination="speckle", bwr=0.6),
    "speckle-4slice-L1": ScenarioSpec(name="speckle-4slice-L1", phantom="ABCD", delta_z_um=30.0,
                                      illumination="speckle", bwr=0.6),
    "speckle-4slice-L2": ScenarioSpec(name="speckle-4slice-L2", phantom="ABCD", delta_z_um=30.0,
                                      illumination="speckle", bwr=0.6, illuminations=2),
}


def get_preset(name: str, **overrides) -> ScenarioSpec:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
    return replace(spec, **overrides) if overrides else spec


@dataclass(eq=False)
class ScenarioResult:
    spec: ScenarioSpec
    truth: RIVolume
    illuminations: IlluminationSet
    measurements: MeasurementSet
    state: SolverState
    report: EvaluationReport
    out_dir: Path | None = None


def build_measurements(spec: ScenarioSpec):
    """Phantom, illuminations and detected data for ``spec``."""
    grid = spec.grid
    ctx = PropagationContext(spec.wavelength, grid)
    truth = phantom_letters(spec.phantom, grid, spec.delta_z_um * 1e-6, spec.detector_gap_um * 1e-6,
                            N_LETTER, N_MEDIUM)
    through = transmission(truth, 1, spec.wavelength) if spec.bwr_reference == "slice1" else None
    items = []
    for l in range(spec.illuminations):
        seed = derive_seed(spec.master_seed, ILLUMINATION_STREAM, l)
        if spec.illumination == "plane":
            ispec = IlluminationSpec("plane", grid)
        else:
            ispec = IlluminationSpec("speckle", grid, spec.bwr, seed)
        items.append(synthesize(ispec, ctx, spec.na, through))
    illum = IlluminationSet(items)
    detector = DetectorModel(spec.na, spec.photons_per_pixel,
                             derive_seed(spec.master_seed, NOISE_STREAM))
    meas = acquire(truth, illum, ctx, detector)
    return ctx, truth, illum, meas


def _log_csv(state: SolverState) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_HEADER)
    for row in state.log:
        w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    return buf.getvalue()


def _manifest(spec, meas: MeasurementSet, illum: IlluminationSet) -> list:
    det = meas.detector
    pairs = [
        ("scenario", spec.name),
        ("n_illuminations", len(illum)),
        ("n_slices", meas.n_slices),
        ("n_medium", repr(meas.n_medium)),
        ("delta_z_m", repr(meas.delta_z)),
        ("detector_gap_m", repr(meas.detector_gap)),
        ("wavelength_m", repr(meas.wavelength)),
        ("na", repr(det.na)),
        ("photons_per_pixel", "noiseless" if det.noiseless else repr(det.photons_per_pixel)),
        ("noise_seed", det.noise_seed),
        ("master_seed", spec.master_seed),
    ]
    for l, it in enumerate(illum):
        pairs.append((f"illum_{l:02d}", it.metadata_line()))
    return pairs


def write_measurements(out_dir, meas: MeasurementSet, illum: IlluminationSet, spec=None) -> None:
    out_dir = Path(out_dir)
    for l, (it, f) in enumerate(zip(illum, meas.fields)):
        fileio.write_field(out_dir / f"illum_{l:02d}.asitfld", it.field, meas.wavelength)
        fileio.atomic_write(out_dir / f"illum_{l:02d}.meta", it.metadata_line() + "\n")
        fileio.write_field(out_dir / f"meas_{l:02d}.asitfld", f, meas.wavelength)
    name = spec if spec is not None else ScenarioSpec(name="measurements")
    fileio.write_keyvalue(out_dir / "manifest.txt", _manifest(name, meas, illum))


def read_measurements(run_dir):
    """Load a directory written by :func:`write_measurements`.

    Returns ``(ctx, measurements, illuminations)``.
    """
    run_dir = Path(run_dir)
    man = fileio.read_keyvalue(run_dir / "manifest.txt")
    n_illum = int(man["n_illuminations"])
    wavelength = float(man["wavelength_m"])
    photons = man["photons_per_pixel"]
    detector = DetectorModel(float(man["na"]), None if photons == "noiseless" else float(photons),
                             int(man["noise_seed"]))
    fields_, items = [], []
    for l in range(n_illum):
        f, _ = fileio.read_field(run_dir / f"meas_{l:02d}.asitfld")
        u, _ = fileio.read_field(run_dir / f"illum_{l:02d}.asitfld")
        fields_.append(f)
        items.append(Illumination(u, "file"))
    meas = MeasurementSet(fields_, detector, float(man["delta_z_m"]), float(man["detector_gap_m"]),
                          wavelength, int(man["n_slices"]), float(man["n_medium"]))
    ctx = PropagationContext(wavelength, fields_[0].grid)
    return ctx, meas, IlluminationSet(items)


def write_run(out_dir, result: ScenarioResult) -> Path:
    out_dir = Path(out_dir)
    spec, truth, state = result.spec, result.truth, result.state
    wl = spec.wavelength
    fileio.atomic_write(out_dir / "scenario.txt", spec.to_text())
    fileio.write_volume(out_dir / "truth.asitvol", truth, wl)
    write_measurements(out_dir, result.measurements, result.illuminations, spec)
    fileio.write_volume(out_dir / "estimate.asitvol", state.estimate, wl)
    fileio.atomic_write(out_dir / "iterations.csv", _log_csv(state))
    fileio.atomic_write(out_dir / "report.csv", result.report.to_csv())
    fileio.atomic_write(out_dir / "report.txt", result.report.summary())
    lo, hi = truth.n_medium, max(float(truth.slices.max()), truth.n_medium + 1e-9)
    images = out_dir / "images"
    for j in range(1, truth.n_slices + 1):
        fileio.export_image(images / f"truth_slice{j}.pgm", truth.slices[j - 1], lo, hi)
        fileio.export_image(images / f"recon_slice{j}.pgm", state.estimate.slices[j - 1], lo, hi)
    for l, (it, f) in enumerate(zip(result.illuminations, result.measurements.fields)):
        fileio.export_image(images / f"illum_{l:02d}_phase.pgm",
                            fileio.image_source("field-phase", field=it.field), -np.pi, np.pi)
        fileio.export_image(images / f"meas_{l:02d}_magnitude.pgm",
                            fileio.image_source("field-magnitude", field=f))
    figures = out_dir / "figures"
    plotting.plot_slices(truth, state.estimate, figures / "slices.png", lo, hi)
    plotting.plot_convergence(state.log, figures / "convergence.png")
    plotting.plot_illumination(result.illuminations[0].field, result.measurements.fields[0],
                               figures / "illumination.png")
    return out_dir


def run_scenario(spec: ScenarioSpec, out_dir=None, solver_config: SolverConfig | None = None) -> ScenarioResult:
    """phantom -> illuminations -> acquire -> solve -> evaluate (-> write).

    ``report.runtime_seconds`` is kept in memory only; files in the run
    directory are a pure function of the scenario so reruns are byte-identical.
    """
    tic = time.perf_counter()
    ctx, truth, illum, meas = build_measurements(spec)
    state = solve(meas, illum, ctx, solver_config or spec.solver_config(), ground_truth=truth)
    report = evaluate(state.estimate, truth, time.perf_counter() - tic)
    result = ScenarioResult(spec, truth, illum, meas, state, report)
    if out_dir is not None:
        result.out_dir = write_run(out_dir, result)
    return result


SWEEP_HEADER = ("delta_z_um", "bwr", "n_slices", "n_illuminations", "master_seed", "status",
                "e_percent", "e_percent_contrast", "crosstalk_mean", "achieved_bwr")

MAX_SWEEP_CELLS = 256


def sweep(base: ScenarioSpec, delta_z_um, bwrs, slice_counts, illumination_counts,
          out_csv=None) -> list[dict]:
    """Run every (delta_z, bwr, slice count, L) cell; failures are recorded, not raised."""
    cells = [(dz, b, n, L) for dz in delta_z_um for b in bwrs for n in slice_counts
             for L in illumination_counts]
    if len(cells) > MAX_SWEEP_CELLS:
        raise ValueError(f"sweep has {len(cells)} cells; limit is {MAX_SWEEP_CELLS}")
    rows = []
    for dz, b, n, L in cells:
        if not 1 <= n <= 4:
            raise ValueError(f"slice count must be 1..4, got {n}")
        spec = replace(base, name=f"{base.name}-dz{dz}-bwr{b}-n{n}-L{L}", delta_z_um=float(dz),
                       bwr=float(b), phantom="ABCD"[:n], illuminations=int(L))
        row = {"delta_z_um": float(dz), "bwr": float(b), "n_slices": n, "n_illuminations": L,
               "master_seed": spec.master_seed}
        try:
            res = run_scenario(spec)
        except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the sweep
            log.warning("sweep cell %s failed: %s", spec.name, exc)
            row.update(status=f"error: {type(exc).__name__}: {exc}".replace(",", ";"),
                       e_percent="", e_percent_contrast="", crosstalk_mean="", achieved_bwr="")
        else:
            rep = res.report
            row.update(status="ok", e_percent=rep.e_percent_global,
                       e_percent_contrast=rep.e_percent_contrast,
                       crosstalk_mean=float(np.mean(rep.crosstalk_index_per_slice)),
                       achieved_bwr=res.illuminations[0].achieved_bwr)
        rows.append(row)
    if out_csv is not None:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=SWEEP_HEADER, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
        fileio.atomic_write(out_csv, buf.getvalue())
    return rows
