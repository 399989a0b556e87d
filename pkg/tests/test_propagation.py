import numpy as np
import pytest

from asit.grid import ComplexField2D, Grid2D, fft2
from asit.propagation import (PropagationContext, adjoint_propagate, bandlimit, disk_mask,
                              propagate)

from conftest import WAVELENGTH, bandlimited_field, random_field

F_NA = 0.3 / WAVELENGTH


def inner(a, b):
    return np.vdot(a.values, b.values)


def test_plane_wave_picks_up_global_phase(ctx64, grid64):
    u = ComplexField2D(grid64, np.ones(grid64.shape))
    out = propagate(u, 50e-6, ctx64)
    np.testing.assert_allclose(out.values, np.exp(1j * 2 * np.pi * 50 / 0.65), atol=1e-12)
    np.testing.assert_allclose(np.abs(out.values), 1.0, atol=1e-12)


def test_zero_distance_is_identity(rng, ctx64, grid64):
    u = bandlimited_field(rng, grid64, F_NA)
    assert np.max(np.abs(propagate(u, 0.0, ctx64).values - u.values)) < 1e-14
    assert np.max(np.abs(adjoint_propagate(u, 0.0, ctx64).values - u.values)) < 1e-14


def test_group_law(rng, ctx64, grid64):
    u = bandlimited_field(rng, grid64, F_NA)
    two = propagate(propagate(u, 13e-6, ctx64), 27e-6, ctx64)
    one = propagate(u, 40e-6, ctx64)
    assert np.max(np.abs(two.values - one.values)) < 1e-10


@pytest.mark.parametrize("z", [-80e-6, 5e-6, 150e-6])
def test_unitary_on_propagating_subspace(rng, ctx64, grid64, z):
    u = bandlimited_field(rng, grid64, F_NA)
    out = propagate(u, z, ctx64)
    assert abs(out.energy - u.energy) / u.energy < 1e-12


def test_evanescent_energy_removed():
    g = Grid2D.square(32, 0.2e-6)  # Nyquist 2.5 /um > 1/wavelength
    ctx = PropagationContext(WAVELENGTH, g)
    u = random_field(np.random.default_rng(5), g)
    U = fft2(u)
    propagating = np.sum(np.abs(U[ctx.propagating]) ** 2) / u.values.size
    out = propagate(u, 3e-6, ctx)
    assert out.energy == pytest.approx(propagating, rel=1e-12)
    assert out.energy < u.energy


def test_adjoint_inner_product(ctx64, grid64):
    rng = np.random.default_rng(99)
    g = Grid2D.square(32, 1e-6)
    ctx = PropagationContext(WAVELENGTH, g)
    worst = 0.0
    for _ in range(100):
        x, y = random_field(rng, g), random_field(rng, g)
        z = rng.uniform(-200e-6, 200e-6)
        lhs = inner(propagate(x, z, ctx), y)
        rhs = inner(x, adjoint_propagate(y, z, ctx))
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(x.values) * np.linalg.norm(y.values)))
    assert worst < 1e-12


def test_adjoint_inverts_on_bandlimited(rng, ctx64, grid64):
    u = bandlimited_field(rng, grid64, F_NA)
    back = adjoint_propagate(propagate(u, 70e-6, ctx64), 70e-6, ctx64)
    assert np.max(np.abs(back.values - u.values)) < 1e-10


def test_bandlimit_idempotent_and_spectrally_clean(rng, grid64):
    u = random_field(rng, grid64)
    once = bandlimit(u, F_NA)
    twice = bandlimit(once, F_NA)
    assert np.max(np.abs(once.values - twice.values)) < 1e-14
    outside = ~disk_mask(grid64, F_NA)
    leak = np.sum(np.abs(fft2(once)[outside]) ** 2)
    assert leak < 1e-20 * np.sum(np.abs(fft2(once)) ** 2)


def test_bandlimit_self_adjoint(rng, grid64):
    x, y = random_field(rng, grid64), random_field(rng, grid64)
    lhs = inner(bandlimit(x, F_NA), y)
    rhs = inner(x, bandlimit(y, F_NA))
    assert abs(lhs - rhs) / (np.linalg.norm(x.values) * np.linalg.norm(y.values)) < 1e-12


def test_bandlimit_keeps_constant(grid64):
    u = ComplexField2D(grid64, np.full(grid64.shape, 2 - 1j))
    np.testing.assert_allclose(bandlimit(u, 1.0).values, u.values, atol=1e-14)


def test_disk_edge_kept():
    g = Grid2D.square(16, 1.0)
    mask = disk_mask(g, 2 / 16)
    assert mask[0, 2] and mask[2, 0] and not mask[0, 3]


def test_grid_mismatch(rng, ctx64):
    u = random_field(rng, Grid2D.square(32))
    with pytest.raises(ValueError):
        propagate(u, 1e-6, ctx64)


def test_long_distance_warns(ctx64, grid64, caplog):
    u = ComplexField2D(grid64, np.ones(grid64.shape))
    propagate(u, 1e-3, ctx64)
    assert "aliasing-safe" in caplog.text
