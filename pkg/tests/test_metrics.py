import numpy as np
import pytest

from asit.grid import Grid2D
from asit.metrics import (contrast_relative_error, crosstalk_index, evaluate, relative_error,
                          relative_error_per_slice)
from asit.scene import N_LETTER, letter_mask, phantom_letters


@pytest.fixture(scope="module")
def truth():
    return phantom_letters("AB", Grid2D.square(100), 30e-6)


def test_relative_error_trivial_cases(truth):
    assert relative_error(truth, truth) == 0.0
    assert relative_error(truth.with_slices(np.zeros_like(truth.slices)), truth) == pytest.approx(100.0)
    assert relative_error(truth.with_slices(truth.slices * 1.01), truth) == pytest.approx(1.0, rel=1e-12)
    assert relative_error_per_slice(truth.with_slices(truth.slices * 1.01), truth) == pytest.approx([1.0, 1.0])


def test_contrast_error_of_medium_estimate_is_100(truth):
    est = truth.with_slices(np.full(truth.slices.shape, truth.n_medium))
    assert contrast_relative_error(est, truth) == pytest.approx(100.0, rel=1e-12)


def test_geometry_mismatch(truth):
    other = phantom_letters("ABC", Grid2D.square(100), 30e-6)
    with pytest.raises(ValueError):
        relative_error(other, truth)


def test_crosstalk_perfect_is_zero(truth):
    assert crosstalk_index(truth, truth, 1) == 0.0
    assert crosstalk_index(truth, truth, 2) == 0.0


def test_crosstalk_constructed_leak(truth):
    g = truth.grid
    a, b = letter_mask("A", g), letter_mask("B", g)
    est = truth.slices.copy()
    est[0][b] = N_LETTER
    got = crosstalk_index(truth.with_slices(est), truth, 1)
    assert got == pytest.approx(np.count_nonzero(b & ~a) / np.count_nonzero(a), rel=1e-12)
    assert crosstalk_index(truth.with_slices(est), truth, 2) == 0.0


def test_crosstalk_monotone_in_leak_strength(truth):
    b = letter_mask("B", truth.grid)
    vals = []
    for s in (0.1, 0.5, 1.0):
        est = truth.slices.copy()
        est[0][b] += s * (N_LETTER - truth.n_medium)
        vals.append(crosstalk_index(truth.with_slices(est), truth, 1))
    assert vals[0] < vals[1] < vals[2]


def test_crosstalk_index_range(truth):
    with pytest.raises(IndexError):
        crosstalk_index(truth, truth, 0)
    with pytest.raises(IndexError):
        crosstalk_index(truth, truth, 3)


def test_evaluate_report(truth):
    est = truth.with_slices(truth.slices * 1.01)
    rep = evaluate(est, truth, 1.5)
    assert rep.e_percent_global == pytest.approx(1.0)
    assert len(rep.crosstalk_index_per_slice) == 2
    lines = rep.to_csv().splitlines()
    assert lines[0] == "slice,e_percent,crosstalk_index"
    assert lines[-2].startswith("global,")
    assert "E% global: 1.000000" in rep.summary()
