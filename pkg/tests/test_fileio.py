import os
from pathlib import Path

import numpy as np
import pytest

from asit.fileio import (FormatError, export_image, field_bytes, format_keyvalue, image_source,
                         parse_field, parse_keyvalue, read_field, read_pgm, read_volume,
                         to_pgm_bytes, volume_bytes, write_field, write_volume)
from asit.grid import Grid2D
from asit.scene import RIVolume, phantom_letters

from conftest import WAVELENGTH, random_field

GOLDEN = Path(__file__).parent / "golden"


def test_field_round_trip(tmp_path, rng):
    u = random_field(rng, Grid2D(12, 7, 1e-6, 2e-6))
    p = write_field(tmp_path / "u.asitfld", u, WAVELENGTH)
    v, wl = read_field(p)
    assert wl == WAVELENGTH and v.grid == u.grid
    np.testing.assert_array_equal(v.values, u.values)


def test_volume_round_trip(tmp_path, rng):
    g = Grid2D(9, 5, 1e-6, 1e-6)
    vol = RIVolume(g, 3e-6, 7e-6, 1.33, 1.33 + rng.random((3, 5, 9)))
    back, wl = read_volume(write_volume(tmp_path / "v.asitvol", vol, WAVELENGTH))
    assert wl == WAVELENGTH
    assert back.same_geometry(vol) and back.n_medium == vol.n_medium
    np.testing.assert_array_equal(back.slices, vol.slices)


def test_field_rejects_bad_magic_and_truncation(rng):
    buf = field_bytes(random_field(rng, Grid2D.square(4)), WAVELENGTH)
    with pytest.raises(FormatError):
        parse_field(b"XXXXXXXX" + buf[8:])
    with pytest.raises(FormatError):
        parse_field(buf[:-1])
    with pytest.raises(FormatError):
        parse_field(buf[:10])


def test_volume_rejects_field_file(tmp_path, rng):
    p = write_field(tmp_path / "u.asitfld", random_field(rng, Grid2D.square(4)), WAVELENGTH)
    with pytest.raises(FormatError):
        read_volume(p)


def test_volume_bytes_are_little_endian_doubles():
    g = Grid2D.square(2)
    buf = volume_bytes(RIVolume(g, 1e-6, 0.0, 1.5, np.full((1, 2, 2), 1.5)), WAVELENGTH)
    assert buf[:8] == b"ASITVOL1"
    np.testing.assert_array_equal(np.frombuffer(buf[-32:], "<f8"), 1.5)


def test_keyvalue_round_trip():
    text = "# comment\n a = 1 \n\nb=two words\n"
    assert parse_keyvalue(text) == {"a": "1", "b": "two words"}
    assert parse_keyvalue(format_keyvalue([("x", 1.5), ("y", "z")])) == {"x": "1.5", "y": "z"}


def test_keyvalue_rejects_garbage():
    with pytest.raises(ValueError):
        parse_keyvalue("no equals sign here\n")


def test_pgm_endpoints_and_header(tmp_path):
    a = np.array([[0.0, 0.5], [1.0, 2.0]])
    p = export_image(tmp_path / "a.pgm", a, 0.0, 1.0)
    assert p.read_bytes().startswith(b"P5\n2 2\n65535\n")
    np.testing.assert_array_equal(read_pgm(p), [[0, 32768], [65535, 65535]])
    auto = np.frombuffer(to_pgm_bytes(a).split(b"\n", 3)[3], ">u2")
    assert auto.min() == 0 and auto.max() == 65535


def test_pgm_degenerate_range_is_zeros(caplog):
    data = to_pgm_bytes(np.full((3, 3), 1.518))
    assert not np.any(np.frombuffer(data.split(b"\n", 3)[3], ">u2"))
    assert "degenerate" in caplog.text


def test_image_sources(rng):
    u = random_field(rng, Grid2D.square(8))
    assert np.all(np.abs(image_source("field-phase", field=u)) <= np.pi)
    np.testing.assert_allclose(image_source("field-magnitude", field=u), np.abs(u.values))
    assert image_source("spectrum-log-magnitude", field=u).shape == (8, 8)
    with pytest.raises(ValueError):
        image_source("ri-slice", field=u)
    with pytest.raises(ValueError):
        image_source("hologram", field=u)


def test_golden_truth_slice_image():
    vol = phantom_letters("AB", Grid2D.square(200), 150e-6)
    data = to_pgm_bytes(image_source("ri-slice", vol, slice_index=1), vol.n_medium, 1.548)
    path = GOLDEN / "truth_ab_slice1.pgm"
    if os.environ.get("ASIT_REGEN_GOLDEN"):
        path.write_bytes(data)
    assert data == path.read_bytes()
