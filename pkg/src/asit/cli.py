"""Command-line entry point: ``asit <subcommand> ...``.

Exit status is 0 on success, 1 on domain errors (a single ``error: ...`` line
on stderr) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
from pathlib import Path

from . import design, experiments, fileio, plotting
from .forward import DetectorModel, acquire
from .grid import Grid2D, set_threads
from .illumination import IlluminationSet, IlluminationSpec, synthesize
from .metrics import evaluate
from .propagation import PropagationContext
from .recon import solve
from .scene import phantom_letters, transmission

log = logging.getLogger("asit")

OUTPUT_ROOT_ENV = "ASIT_OUTPUT_ROOT"


class CLIError(Exception):
    pass


def _out_path(args, default_name: str) -> Path:
    if args.out:
        return Path(args.out)
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "."))
    return root / default_name


def _claim(path: Path, force: bool, directory: bool) -> Path:
    """Refuse to clobber an existing output unless forced."""
    if path.exists():
        is_run = path.is_dir() and any(path.iterdir())
        if path.is_file() or is_run:
            if not force:
                raise CLIError(f"output {path} already exists (use --force to overwrite)")
            if path.is_dir():
                shutil.rmtree(path)
            else:
                path.unlink()
    if directory:
        path.mkdir(parents=True, exist_ok=True)
    return path


def _grid(args) -> Grid2D:
    return Grid2D.square(args.grid_n, args.pixel_um * 1e-6)


def _config(args) -> dict:
    if getattr(args, "config", None):
        return fileio.read_keyvalue(args.config)
    return {}


def cmd_phantom(args):
    grid = _grid(args)
    vol = phantom_letters(args.letters, grid, args.delta_z_um * 1e-6, args.detector_gap_um * 1e-6)
    out = _claim(_out_path(args, "phantom.asitvol"), args.force, False)
    fileio.write_volume(out, vol, args.wavelength_nm * 1e-9)
    print(out)


def cmd_illuminate(args):
    grid = _grid(args)
    wl = args.wavelength_nm * 1e-9
    ctx = PropagationContext(wl, grid)
    through = None
    if args.through:
        vol, _ = fileio.read_volume(args.through)
        through = transmission(vol, 1, wl)
    seed = 0 if args.seed is None else args.seed
    spec = IlluminationSpec(args.kind, grid, args.bwr if args.kind == "speckle" else None,
                            seed if args.kind == "speckle" else None)
    illum = synthesize(spec, ctx, args.na, through)
    out = _claim(_out_path(args, "illumination.asitfld"), args.force, False)
    fileio.write_field(out, illum.field, wl)
    fileio.atomic_write(out.with_suffix(".meta"), illum.metadata_line() + "\n")
    print(illum.metadata_line())


def cmd_forward(args):
    vol, wl = fileio.read_volume(args.volume)
    ctx = PropagationContext(wl, vol.grid)
    fields = [fileio.read_field(p)[0] for p in args.illum]
    from .illumination import Illumination
    illum = IlluminationSet([Illumination(f, "file") for f in fields])
    photons = None if args.noiseless else args.photons
    det = DetectorModel(args.na, photons, 0 if args.seed is None else args.seed)
    meas = acquire(vol, illum, ctx, det)
    out = _claim(_out_path(args, "measurements"), args.force, True)
    experiments.write_measurements(out, meas, illum)
    print(out)


def cmd_reconstruct(args):
    ctx, meas, illum = experiments.read_measurements(args.measurements)
    base = experiments.ScenarioSpec.from_mapping(_config(args))
    if args.iterations is not None:
        from dataclasses import replace
        base = replace(base, outer_iterations=args.iterations)
    truth = fileio.read_volume(args.truth)[0] if args.truth else None
    state = solve(meas, illum, ctx, base.solver_config(), ground_truth=truth)
    out = _claim(_out_path(args, "reconstruction"), args.force, True)
    fileio.write_volume(out / "estimate.asitvol", state.estimate, ctx.wavelength)
    fileio.atomic_write(out / "iterations.csv", experiments._log_csv(state))
    if truth is not None:
        rep = evaluate(state.estimate, truth)
        fileio.atomic_write(out / "report.csv", rep.to_csv())
        fileio.atomic_write(out / "report.txt", rep.summary())
        sys.stdout.write(rep.summary())
    print(out)


def cmd_bwr(args):
    field, wl = fileio.read_field(args.field)
    if args.wavelength_nm:
        wl = args.wavelength_nm * 1e-9
    rep = design.spectral_report(field, args.na, wl)
    print(f"bwr={rep.bwr:.6f} f_bwr={rep.f_bwr:.6g} f_na={rep.f_na:.6g} z_d_m={rep.z_d:.6g}")


def cmd_design_curve(args):
    wl = args.wavelength_nm * 1e-9
    samples = None
    if args.bwr:
        samples = [float(s) for s in args.bwr.split(",")]
    rows = design.design_curve(args.na, wl, samples)
    text = design.design_curve_csv(rows)
    if args.out:
        out = _claim(Path(args.out), args.force, False)
        fileio.atomic_write(out, text)
        if args.plot:
            plotting.plot_design_curve(rows, args.plot, wavelength=wl, na=args.na)
    else:
        sys.stdout.write(text)


def _scenario_from(name_or_path: str, args) -> experiments.ScenarioSpec:
    if name_or_path in experiments.PRESETS:
        spec = experiments.get_preset(name_or_path)
    elif Path(name_or_path).is_file():
        spec = experiments.ScenarioSpec.from_text(Path(name_or_path).read_text())
    else:
        raise CLIError(f"unknown preset or scenario file {name_or_path!r}")
    overrides = _config(args)
    if overrides:
        merged = dict(fileio.parse_keyvalue(spec.to_text()))
        merged.update(overrides)
        spec = experiments.ScenarioSpec.from_mapping(merged)
    if args.seed is not None:
        from dataclasses import replace
        spec = replace(spec, master_seed=args.seed)
    return spec


def cmd_experiment(args):
    spec = _scenario_from(args.preset, args)
    out = _claim(_out_path(args, spec.name), args.force, True)
    res = experiments.run_scenario(spec, out)
    sys.stdout.write(res.report.summary())
    print(f"runtime_seconds={res.report.runtime_seconds:.2f}")
    print(out)


def _floats(text):
    return [float(v) for v in text.split(",")]


def _ints(text):
    return [int(v) for v in text.split(",")]


def cmd_sweep(args):
    spec = _scenario_from(args.preset, args)
    out = _claim(_out_path(args, "sweep.csv"), args.force, False)
    rows = experiments.sweep(spec, _floats(args.delta_z_um), _floats(args.bwr),
                             _ints(args.slices), _ints(args.illuminations), out)
    print(f"{len(rows)} cells -> {out}")


def cmd_export_image(args):
    vol = fileio.read_volume(args.volume)[0] if args.volume else None
    field = fileio.read_field(args.field)[0] if args.field else None
    arr = fileio.image_source(args.source, vol, field, args.slice)
    out = _claim(_out_path(args, "image.pgm"), args.force, False)
    fileio.export_image(out, arr, args.vmin, args.vmax)
    print(out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master/RNG seed")
    common.add_argument("--out", default=None, help="output path")
    common.add_argument("--config", default=None, help="key = value override file")
    common.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("-v", "--verbose", action="store_true")

    geom = argparse.ArgumentParser(add_help=False)
    geom.add_argument("--grid-n", type=int, default=200)
    geom.add_argument("--pixel-um", type=float, default=1.0)
    geom.add_argument("--wavelength-nm", type=float, default=650.0)

    p = argparse.ArgumentParser(prog="asit", description="Axial structured illumination tomography toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", parents=[common, geom], help="rasterize a letter phantom")
    s.add_argument("--letters", default="AB")
    s.add_argument("--delta-z-um", type=float, default=150.0)
    s.add_argument("--detector-gap-um", type=float, default=100.0)
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("illuminate", parents=[common, geom], help="synthesize an illumination")
    s.add_argument("--kind", choices=("plane", "speckle"), default="speckle")
    s.add_argument("--bwr", type=float, default=0.6)
    s.add_argument("--na", type=float, default=0.3)
    s.add_argument("--through", default=None, help="tune bwr on the exit wave of this volume's first slice")
    s.set_defaults(func=cmd_illuminate)

    s = sub.add_parser("forward", parents=[common], help="simulate detected fields")
    s.add_argument("--volume", required=True)
    s.add_argument("--illum", nargs="+", required=True)
    s.add_argument("--na", type=float, default=0.3)
    s.add_argument("--photons", type=float, default=5e4)
    s.add_argument("--noiseless", action="store_true")
    s.set_defaults(func=cmd_forward)

    s = sub.add_parser("reconstruct", parents=[common], help="run the TV-regularized solver")
    s.add_argument("--measurements", required=True, help="directory written by 'forward'")
    s.add_argument("--truth", default=None)
    s.add_argument("--iterations", type=int, default=None)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("bwr", parents=[common], help="bandwidth ratio of a field file")
    s.add_argument("--field", required=True)
    s.add_argument("--na", type=float, default=0.3)
    s.add_argument("--wavelength-nm", type=float, default=None)
    s.set_defaults(func=cmd_bwr)

    s = sub.add_parser("design-curve", parents=[common], help="tabulate z_d against bwr")
    s.add_argument("--na", type=float, default=0.3)
    s.add_argument("--wavelength-nm", type=float, default=650.0)
    s.add_argument("--bwr", default=None, help="comma-separated samples")
    s.add_argument("--plot", default=None, help="also render a PNG (needs --out)")
    s.set_defaults(func=cmd_design_curve)

    s = sub.add_parser("experiment", parents=[common], help="run a preset or scenario file")
    s.add_argument("preset")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("sweep", parents=[common], help="grid of scenario runs")
    s.add_argument("--preset", default="speckle-2slice-30")
    s.add_argument("--delta-z-um", default="30")
    s.add_argument("--bwr", default="0.6")
    s.add_argument("--slices", default="2")
    s.add_argument("--illuminations", default="1")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("export-image", parents=[common], help="write a 16-bit PGM")
    s.add_argument("--source", required=True,
                   choices=("ri-slice", "field-phase", "field-magnitude", "spectrum-log-magnitude"))
    s.add_argument("--volume", default=None)
    s.add_argument("--field", default=None)
    s.add_argument("--slice", type=int, default=1)
    s.add_argument("--vmin", type=float, default=None)
    s.add_argument("--vmax", type=float, default=None)
    s.set_defaults(func=cmd_export_image)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        set_threads(args.threads)
        args.func(args)
    except (CLIError, ValueError, IndexError, OSError, RuntimeError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
