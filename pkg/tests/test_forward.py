import os
from pathlib import Path

import numpy as np
import pytest

from asit.fileio import field_bytes, read_field
from asit.forward import DetectorModel, acquire, detect, msbp_forward
from asit.grid import ComplexField2D, Grid2D, fft2
from asit.illumination import Illumination, IlluminationSet, plane_wave
from asit.propagation import PropagationContext, bandlimit, propagate
from asit.scene import RIVolume, phantom_letters, transmission

from conftest import WAVELENGTH, bandlimited_field, random_field

GOLDEN = Path(__file__).parent / "golden"
NA = 0.3
F_NA = NA / WAVELENGTH
NOISELESS = DetectorModel(NA, None)


def test_empty_volume_plane_wave_is_global_phase(ctx64):
    g = ctx64.grid
    vol = RIVolume(g, 20e-6, 100e-6, 1.518, np.full((2, 64, 64), 1.518))
    out = msbp_forward(vol, plane_wave(g), ctx64, NOISELESS)
    k = 2 * np.pi / WAVELENGTH
    expected = np.exp(1j * k * 120e-6)
    np.testing.assert_allclose(out.values, expected, atol=1e-12)


def test_without_object_slice_spacing_is_irrelevant(ctx64, rng):
    """With zero contrast the output only depends on the total propagation path."""
    g = ctx64.grid
    u = bandlimited_field(rng, g, F_NA)
    a = RIVolume.uniform(g, 3, 10e-6, 50e-6)
    b = RIVolume.uniform(g, 2, 20e-6, 50e-6)
    np.testing.assert_allclose(msbp_forward(a, u, ctx64, NOISELESS).values,
                               msbp_forward(b, u, ctx64, NOISELESS).values, atol=1e-12)


def test_single_slice_zero_gap(ctx64, rng):
    g = ctx64.grid
    vol = RIVolume(g, 5e-6, 0.0, 1.518, 1.518 + 0.02 * rng.random((1, 64, 64)))
    u = random_field(rng, g)
    out = msbp_forward(vol, u, ctx64, NOISELESS)
    expected = bandlimit(u.with_values(u.values * transmission(vol, 1, WAVELENGTH).values), F_NA)
    np.testing.assert_allclose(out.values, expected.values, atol=1e-12)


def test_three_slice_structure(ctx64, rng):
    """Compare against an explicit chain built from the public primitives."""
    g = ctx64.grid
    vol = RIVolume(g, 12e-6, 40e-6, 1.5, 1.5 + 0.03 * rng.random((3, 64, 64)))
    u = random_field(rng, g)
    w = u
    for j in (1, 2, 3):
        w = w.with_values(w.values * transmission(vol, j, WAVELENGTH).values)
        if j < 3:
            w = propagate(w, 12e-6, ctx64)
    w = bandlimit(propagate(w, 40e-6, ctx64), F_NA)
    np.testing.assert_allclose(msbp_forward(vol, u, ctx64, NOISELESS).values, w.values, atol=1e-12)


def test_output_is_bandlimited_and_energy_bounded(ctx64, rng):
    g = ctx64.grid
    vol = RIVolume(g, 12e-6, 40e-6, 1.5, 1.5 + 0.05 * rng.random((2, 64, 64)))
    u = random_field(rng, g)
    out = msbp_forward(vol, u, ctx64, NOISELESS)
    U = fft2(out)
    outside = np.hypot(*np.meshgrid(g.fx, g.fy)) > F_NA
    assert np.max(np.abs(U[outside])) <= 1e-13 * np.max(np.abs(U))
    assert out.energy <= u.energy * (1 + 1e-12)


def test_noise_statistics(grid64):
    det = DetectorModel(NA, 5e4, noise_seed=9)
    assert det.noise_std == pytest.approx(3.1623e-3, rel=1e-4)
    zero = ComplexField2D(Grid2D.square(256), np.zeros((256, 256)))
    n = detect(zero, det).values
    assert np.std(n.real) == pytest.approx(det.noise_std, rel=0.02)
    assert np.std(n.imag) == pytest.approx(det.noise_std, rel=0.02)
    assert abs(np.mean(n.real)) < 4 * det.noise_std / 256


def test_noise_streams_independent_per_illumination():
    det = DetectorModel(NA, 5e4, noise_seed=9)
    zero = ComplexField2D(Grid2D.square(32), np.zeros((32, 32)))
    a, b = detect(zero, det, 0).values, detect(zero, det, 1).values
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, detect(zero, det, 0).values)


def test_noiseless_detection_is_identity(rng, grid64):
    u = random_field(rng, grid64)
    assert detect(u, NOISELESS) is u


def test_identical_illuminations_give_identical_noiseless_data(ctx64):
    vol = phantom_letters("AB", ctx64.grid, 30e-6)
    it = Illumination(plane_wave(ctx64.grid), "plane")
    meas = acquire(vol, IlluminationSet([it, it]), ctx64, NOISELESS)
    np.testing.assert_array_equal(meas.fields[0].values, meas.fields[1].values)
    assert meas.n_slices == 2 and meas.n_medium == vol.n_medium


def test_geometry_check_rejects_high_na():
    g = Grid2D.square(32, 2e-6)  # Nyquist 2.5e5 < 0.6/650nm
    ctx = PropagationContext(WAVELENGTH, g)
    vol = RIVolume.uniform(g, 1, 1e-6, 0.0)
    with pytest.raises(ValueError, match="Nyquist"):
        msbp_forward(vol, plane_wave(g), ctx, DetectorModel(0.6, None))


def _golden_measurement():
    g = Grid2D.square(64)
    ctx = PropagationContext(WAVELENGTH, g)
    vol = phantom_letters("AB", g, 150e-6)
    meas = acquire(vol, [plane_wave(g)], ctx, DetectorModel(NA, 5e4, noise_seed=7))
    return meas.fields[0]


def test_golden_plane_wave_measurement():
    path = GOLDEN / "pw_ab150_n64_seed7.asitfld"
    data = field_bytes(_golden_measurement(), WAVELENGTH)
    if os.environ.get("ASIT_REGEN_GOLDEN"):
        path.write_bytes(data)
    ref, wl = read_field(path)
    assert wl == WAVELENGTH
    np.testing.assert_allclose(ref.values, _golden_measurement().values, rtol=0, atol=1e-12)
