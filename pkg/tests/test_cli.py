import subprocess
import sys

import pytest

from asit.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_design_curve_row(capsys):
    code, out, _ = run(["design-curve", "--na", "0.3", "--wavelength-nm", "650"], capsys)
    assert code == 0
    rows = dict(line.split(",") for line in out.splitlines()[1:])
    assert float(rows["0.24"]) == pytest.approx(125.4e-6, abs=0.5e-6)


def test_design_curve_csv_and_plot(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    code, _, _ = run(["design-curve", "--out", str(out), "--plot", str(tmp_path / "c.png")], capsys)
    assert code == 0 and out.read_text().startswith("bwr,z_d_m\n")
    assert (tmp_path / "c.png").read_bytes()[:4] == b"\x89PNG"


def test_unknown_subcommand_is_usage_error(capsys):
    code, _, err = run(["teleport"], capsys)
    assert code == 2 and "usage" in err


def test_unknown_flag_is_usage_error(capsys):
    assert run(["bwr", "--bogus"], capsys)[0] == 2


def test_domain_error_is_one_line(capsys):
    code, _, err = run(["design-curve", "--bwr", "0"], capsys)
    assert code == 1
    assert err.count("\n") == 1 and err.startswith("error: ValueError:")


def test_missing_file_is_domain_error(tmp_path, capsys):
    code, _, err = run(["bwr", "--field", str(tmp_path / "missing.asitfld")], capsys)
    assert code == 1 and err.startswith("error: FileNotFoundError")


def test_illuminate_then_bwr(tmp_path, capsys):
    field = tmp_path / "exit.asitfld"
    code, _, _ = run(["illuminate", "--kind", "speckle", "--bwr", "0.6", "--seed", "3",
                      "--out", str(field)], capsys)
    assert code == 0 and field.with_suffix(".meta").is_file()
    code, out, _ = run(["bwr", "--field", str(field), "--na", "0.3"], capsys)
    assert code == 0
    value = float(out.split()[0].split("=")[1])
    assert 0.55 <= value <= 0.65


def test_refuses_to_overwrite(tmp_path, capsys):
    out = tmp_path / "p.asitvol"
    assert run(["phantom", "--grid-n", "64", "--out", str(out)], capsys)[0] == 0
    code, _, err = run(["phantom", "--grid-n", "64", "--out", str(out)], capsys)
    assert code == 1 and "--force" in err
    assert run(["phantom", "--grid-n", "64", "--out", str(out), "--force"], capsys)[0] == 0


def test_pipeline_phantom_forward_reconstruct_export(tmp_path, capsys):
    vol = tmp_path / "p.asitvol"
    ill = tmp_path / "u.asitfld"
    assert run(["phantom", "--grid-n", "64", "--letters", "AB", "--delta-z-um", "30",
                "--out", str(vol)], capsys)[0] == 0
    assert run(["illuminate", "--grid-n", "64", "--kind", "plane", "--out", str(ill)], capsys)[0] == 0
    assert run(["forward", "--volume", str(vol), "--illum", str(ill), "--seed", "4",
                "--out", str(tmp_path / "meas")], capsys)[0] == 0
    code, out, _ = run(["reconstruct", "--measurements", str(tmp_path / "meas"), "--truth", str(vol),
                        "--iterations", "2", "--out", str(tmp_path / "rec")], capsys)
    assert code == 0 and "E% global" in out
    assert len((tmp_path / "rec" / "iterations.csv").read_text().splitlines()) == 3
    code, _, _ = run(["export-image", "--source", "ri-slice", "--volume", str(tmp_path / "rec" / "estimate.asitvol"),
                      "--slice", "2", "--out", str(tmp_path / "s.pgm")], capsys)
    assert code == 0 and (tmp_path / "s.pgm").read_bytes().startswith(b"P5\n64 64\n65535\n")


def test_experiment_with_config_override(tmp_path, capsys):
    cfg = tmp_path / "small.txt"
    cfg.write_text("grid_n = 64\nouter_iterations = 2\nK = 2\n")
    code, out, _ = run(["experiment", "pw-2slice-150", "--config", str(cfg), "--seed", "7",
                        "--out", str(tmp_path / "run")], capsys)
    assert code == 0
    assert "master_seed = 7" in (tmp_path / "run" / "scenario.txt").read_text()
    assert "runtime_seconds=" in out


def test_experiment_unknown_preset(capsys):
    code, _, err = run(["experiment", "no-such-preset"], capsys)
    assert code == 1 and "unknown preset" in err


def test_output_root_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("ASIT_OUTPUT_ROOT", str(tmp_path))
    assert run(["phantom", "--grid-n", "64"], capsys)[0] == 0
    assert (tmp_path / "phantom.asitvol").is_file()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "asit", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "design-curve" in res.stdout
