"""Binary field/volume formats, text manifests and 16-bit PGM export.

ASITFLD1 layout (little endian)::

    b"ASITFLD1" | u32 nx | u32 ny | f64 dx_m | f64 dy_m | f64 wavelength_m
    | nx*ny pairs of f64 (re, im), row-major

ASITVOL1 layout (little endian)::

    b"ASITVOL1" | u32 nx | u32 ny | u32 nz | f64 dx_m | f64 dy_m | f64 dz_m
    | f64 detector_gap_m | f64 n_medium | f64 wavelength_m
    | nz slices of nx*ny f64, row-major
"""

from __future__ import annotations

import logging
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .grid import ComplexField2D, Grid2D
from .scene import RIVolume

__all__ = [
    "FormatError",
    "atomic_write",
    "write_field",
    "read_field",
    "write_volume",
    "read_volume",
    "write_keyvalue",
    "read_keyvalue",
    "to_pgm_bytes",
    "export_image",
    "image_source",
]

log = logging.getLogger(__name__)

FIELD_MAGIC = b"ASITFLD1"
VOLUME_MAGIC = b"ASITVOL1"
_FIELD_HEAD = struct.Struct("<8sII3d")
_VOLUME_HEAD = struct.Struct("<8sIII6d")


class FormatError(ValueError):
    """Malformed or truncated ASIT file."""


def atomic_write(path, data: bytes | str) -> Path:
    """Write ``data`` to a temporary sibling file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def field_bytes(field: ComplexField2D, wavelength: float) -> bytes:
    g = field.grid
    head = _FIELD_HEAD.pack(FIELD_MAGIC, g.nx, g.ny, g.dx, g.dy, wavelength)
    return head + np.ascontiguousarray(field.values, dtype="<c16").tobytes()


def write_field(path, field: ComplexField2D, wavelength: float) -> Path:
    return atomic_write(path, field_bytes(field, wavelength))


def parse_field(buf: bytes) -> tuple[ComplexField2D, float]:
    if len(buf) < _FIELD_HEAD.size:
        raise FormatError("truncated ASITFLD1 header")
    magic, nx, ny, dx, dy, wavelength = _FIELD_HEAD.unpack_from(buf)
    if magic != FIELD_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FIELD_MAGIC!r}")
    expected = _FIELD_HEAD.size + nx * ny * 16
    if len(buf) != expected:
        raise FormatError(f"ASITFLD1 payload has {len(buf)} bytes, expected {expected}")
    values = np.frombuffer(buf, dtype="<c16", offset=_FIELD_HEAD.size).reshape(ny, nx)
    return ComplexField2D(Grid2D(nx, ny, dx, dy), values.astype(np.complex128)), wavelength


def read_field(path) -> tuple[ComplexField2D, float]:
    """Return ``(field, wavelength_m)``."""
    return parse_field(Path(path).read_bytes())


def volume_bytes(volume: RIVolume, wavelength: float) -> bytes:
    g = volume.grid
    head = _VOLUME_HEAD.pack(VOLUME_MAGIC, g.nx, g.ny, volume.n_slices, g.dx, g.dy,
                             volume.delta_z, volume.detector_gap, volume.n_medium, wavelength)
    return head + np.ascontiguousarray(volume.slices, dtype="<f8").tobytes()


def write_volume(path, volume: RIVolume, wavelength: float) -> Path:
    return atomic_write(path, volume_bytes(volume, wavelength))


def read_volume(path) -> tuple[RIVolume, float]:
    buf = Path(path).read_bytes()
    if len(buf) < _VOLUME_HEAD.size:
        raise FormatError("truncated ASITVOL1 header")
    magic, nx, ny, nz, dx, dy, dz, gap, n_medium, wavelength = _VOLUME_HEAD.unpack_from(buf)
    if magic != VOLUME_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {VOLUME_MAGIC!r}")
    expected = _VOLUME_HEAD.size + nx * ny * nz * 8
    if len(buf) != expected:
        raise FormatError(f"ASITVOL1 payload has {len(buf)} bytes, expected {expected}")
    slices = np.frombuffer(buf, dtype="<f8", offset=_VOLUME_HEAD.size).reshape(nz, ny, nx)
    return RIVolume(Grid2D(nx, ny, dx, dy), dz, gap, n_medium, slices.astype(np.float64)), wavelength


# -- key = value text files (scenario files, manifests, metadata sidecars) --

def format_keyvalue(pairs) -> str:
    items = pairs.items() if isinstance(pairs, dict) else pairs
    return "".join(f"{k} = {v}\n" for k, v in items)


def write_keyvalue(path, pairs) -> Path:
    return atomic_write(path, format_keyvalue(pairs))


def parse_keyvalue(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise FormatError(f"line {lineno}: empty key")
        out[key] = value
    return out


def read_keyvalue(path) -> dict[str, str]:
    return parse_keyvalue(Path(path).read_text(encoding="utf-8"))


# -- images --

def image_source(kind: str, volume: RIVolume | None = None, field: ComplexField2D | None = None,
                 slice_index: int = 1) -> np.ndarray:
    """Real 2D array for an export kind.

    ``kind`` is one of ``ri-slice``, ``field-phase``, ``field-magnitude``,
    ``spectrum-log-magnitude``.
    """
    if kind == "ri-slice":
        if volume is None:
            raise ValueError("ri-slice export needs a volume")
        if not 1 <= slice_index <= volume.n_slices:
            raise IndexError(f"slice index {slice_index} out of range 1..{volume.n_slices}")
        return volume.slices[slice_index - 1]
    if field is None:
        raise ValueError(f"{kind} export needs a field")
    if kind == "field-phase":
        return np.angle(field.values)
    if kind == "field-magnitude":
        return np.abs(field.values)
    if kind == "spectrum-log-magnitude":
        return np.log10(1.0 + np.abs(np.fft.fftshift(np.fft.fft2(field.values))))
    raise ValueError(f"unknown image source {kind!r}")


def to_pgm_bytes(array: np.ndarray, vmin: float | None = None, vmax: float | None = None) -> bytes:
    """16-bit binary PGM (P5, maxval 65535, big-endian samples)."""
    a = np.asarray(array, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("PGM export needs a 2D array")
    lo = float(a.min()) if vmin is None else float(vmin)
    hi = float(a.max()) if vmax is None else float(vmax)
    if hi > lo:
        samples = np.clip(np.round(65535.0 * (a - lo) / (hi - lo)), 0, 65535)
    else:
        if hi < lo:
            raise ValueError(f"vmin {lo} exceeds vmax {hi}")
        log.warning("degenerate image range (vmin == vmax == %g); writing all-zero image", lo)
        samples = np.zeros_like(a)
    h, w = a.shape
    return f"P5\n{w} {h}\n65535\n".encode("ascii") + samples.astype(">u2").tobytes()


def export_image(path, array: np.ndarray, vmin: float | None = None, vmax: float | None = None) -> Path:
    return atomic_write(path, to_pgm_bytes(array, vmin, vmax))


def read_pgm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    parts = buf.split(b"\n", 3)
    if parts[0] != b"P5":
        raise FormatError("not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    if int(parts[2]) != 65535:
        raise FormatError("only 16-bit PGM is supported")
    return np.frombuffer(parts[3], dtype=">u2").reshape(h, w)
