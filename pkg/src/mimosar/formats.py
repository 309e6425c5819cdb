"""Binary beat-cube / volume files and graymap slice export.

All binary fields are little-endian. Samples are stored as interleaved
float32 (re, im) in C order, fast-time (cube) or z (volume) fastest.

SARB beat cube::

    b"SARB" u16 version
    u32 nx, ny, n_channels, n_samples
    f64 f0, slope_k, t_chirp, f_sample, c
    f64 dx, dy, origin_x, origin_y, z_plane
    u8 mode (0 = effective-monostatic, 1 = bistatic)
    u32 n_tx, n_rx
    f64 tx offsets (n_tx * 2), rx offsets (n_rx * 2)
    complex64 payload

SARV volume::

    b"SARV" u16 version
    u32 nx, ny, nz
    f64 dx, dy, dz, origin_x, origin_y, origin_z
    complex64 payload

Writing a complex128 array quantizes it to complex64; a cube or volume that
came from a file round-trips bit for bit.
"""
from __future__ import annotations

import math
import os
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .analysis import range_cuts
from .geometry import BISTATIC, MONOSTATIC, ApertureScan, ArrayLayout, ChirpConfig
from .rma import ImageVolume
from .scene import BeatCube

CUBE_MAGIC = b"SARB"
VOLUME_MAGIC = b"SARV"
VERSION = 1
SAMPLE_DTYPE = np.dtype("<c8")
_MODE_CODES = {MONOSTATIC: 0, BISTATIC: 1}
_CUBE_FIXED = struct.Struct("<4sH4I5d5dB2I")
_VOLUME_HEADER = struct.Struct("<4sH3I6d")
U32_MAX = 2 ** 32 - 1


class FormatError(ValueError):
    """Malformed, truncated or foreign binary file."""


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated {what}: expected {n} bytes, got {len(buf)}")
    return buf


def _check_magic(magic: bytes, version: int, expected: bytes):
    if magic != expected:
        raise FormatError(f"bad magic {magic!r}, expected {expected!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}, expected {VERSION}")


def _payload(data: np.ndarray) -> bytes:
    return np.ascontiguousarray(data, dtype=SAMPLE_DTYPE).tobytes()


def _read_payload(source: BinaryIO, shape: tuple[int, ...], what: str) -> np.ndarray:
    count = math.prod(shape)
    nbytes = count * SAMPLE_DTYPE.itemsize
    if nbytes > 2 ** 40:
        raise FormatError(f"{what} dimensions {shape} overflow the supported size")
    buf = _read_exact(source, nbytes, f"{what} payload")
    if source.read(1):
        raise FormatError(f"trailing bytes after {what} payload")
    return np.frombuffer(buf, dtype=SAMPLE_DTYPE).reshape(shape).astype(np.complex64)


def _dims_ok(dims, what):
    for d in dims:
        if not 0 <= d <= U32_MAX:
            raise FormatError(f"{what} dimension {d} does not fit in u32")


def write_beat_cube(cube: BeatCube, sink: BinaryIO) -> None:
    ch, sc, lay = cube.chirp, cube.scan, cube.layout
    nx, ny, nch, nk = cube.data.shape
    _dims_ok((nx, ny, nch, nk, len(lay.tx_offsets), len(lay.rx_offsets)), "cube")
    sink.write(_CUBE_FIXED.pack(
        CUBE_MAGIC, VERSION, nx, ny, nch, nk,
        ch.f0, ch.slope_k, ch.t_chirp, ch.f_sample, ch.c,
        sc.dx, sc.dy, sc.origin[0], sc.origin[1], sc.z_plane,
        _MODE_CODES[lay.mode], len(lay.tx_offsets), len(lay.rx_offsets)))
    sink.write(np.ascontiguousarray(lay.tx_offsets, dtype="<f8").tobytes())
    sink.write(np.ascontiguousarray(lay.rx_offsets, dtype="<f8").tobytes())
    sink.write(_payload(cube.data))


def read_beat_cube(source: BinaryIO) -> BeatCube:
    head = _read_exact(source, _CUBE_FIXED.size, "cube header")
    (magic, version, nx, ny, nch, nk, f0, slope, t_chirp, fs, c,
     dx, dy, ox, oy, z_plane, mode, ntx, nrx) = _CUBE_FIXED.unpack(head)
    _check_magic(magic, version, CUBE_MAGIC)
    modes = {v: k for k, v in _MODE_CODES.items()}
    if mode not in modes:
        raise FormatError(f"unknown array mode code {mode}")
    if ntx * nrx != nch:
        raise FormatError(f"{ntx} Tx x {nrx} Rx does not give {nch} channels")
    offsets = _read_exact(source, 16 * (ntx + nrx), "array offsets")
    off = np.frombuffer(offsets, dtype="<f8").reshape(-1, 2)
    try:
        chirp = ChirpConfig(f0, slope, t_chirp, nk, fs, c)
        scan = ApertureScan(nx, ny, dx, dy, (ox, oy), z_plane)
        layout = ArrayLayout(off[:ntx].copy(), off[ntx:].copy(), modes[mode])
    except ValueError as exc:
        raise FormatError(f"invalid cube header: {exc}") from exc
    data = _read_payload(source, (nx, ny, nch, nk), "cube")
    return BeatCube(data, chirp, scan, layout)


def write_volume(vol: ImageVolume, sink: BinaryIO) -> None:
    nx, ny, nz = vol.shape
    _dims_ok((nx, ny, nz), "volume")
    sink.write(_VOLUME_HEADER.pack(VOLUME_MAGIC, VERSION, nx, ny, nz, *vol.spacing, *vol.origin))
    sink.write(_payload(vol.data))


def read_volume(source: BinaryIO) -> ImageVolume:
    head = _read_exact(source, _VOLUME_HEADER.size, "volume header")
    magic, version, nx, ny, nz, *rest = _VOLUME_HEADER.unpack(head)
    _check_magic(magic, version, VOLUME_MAGIC)
    data = _read_payload(source, (nx, ny, nz), "volume")
    try:
        return ImageVolume(data, tuple(rest[:3]), tuple(rest[3:]))
    except ValueError as exc:
        raise FormatError(f"invalid volume header: {exc}") from exc


def save_beat_cube(cube: BeatCube, path) -> None:
    with open(path, "wb") as fh:
        write_beat_cube(cube, fh)


def load_beat_cube(path) -> BeatCube:
    with open(path, "rb") as fh:
        return read_beat_cube(fh)


def save_volume(vol: ImageVolume, path) -> None:
    with open(path, "wb") as fh:
        write_volume(vol, fh)


def load_volume(path) -> ImageVolume:
    with open(path, "rb") as fh:
        return read_volume(fh)


# ---------------------------------------------------------------------------
# graymap slices
# ---------------------------------------------------------------------------

def db_to_gray(mag: np.ndarray, peak: float, floor_db: float = -40.0) -> np.ndarray:
    """8-bit levels: 255 at ``peak``, 0 at or below ``floor_db``, round half up."""
    if not floor_db < 0:
        raise ValueError("floor_db must be negative")
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag / peak)
    frac = np.clip((db - floor_db) / (-floor_db), 0.0, 1.0)
    # the tiny nudge keeps exact halves (e.g. -20 dB of a -40 dB floor) from
    # landing a hair below .5 after the log
    return np.floor(frac * 255.0 + 0.5 + 1e-9).astype(np.uint8)


def write_pgm(image: np.ndarray, path) -> None:
    """Binary P5 graymap; rows are y, columns x, first row is the largest y."""
    img = np.ascontiguousarray(np.flipud(image.T), dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Inverse of :func:`write_pgm`; returns the image indexed [ix, iy]."""
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise FormatError("not a binary graymap")
    w, h = int(fields[1]), int(fields[2])
    img = np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8).reshape(h, w)
    return np.flipud(img).T.copy()


def slice_filename(z: float) -> str:
    return f"cut_z{z * 1e3:09.3f}mm.pgm"


def export_slices(vol: ImageVolume, z_values, floor_db: float = -40.0, directory=".") -> list[Path]:
    """Write one graymap per range cut, scaled against the volume's global peak."""
    cuts = range_cuts(vol, z_values)
    peak = float(np.abs(vol.data).max())
    if peak == 0:
        raise ValueError("volume is all zero")
    os.makedirs(directory, exist_ok=True)
    paths = []
    for cut in cuts:
        path = Path(directory) / slice_filename(cut.z)
        write_pgm(db_to_gray(cut.image, peak, floor_db), path)
        paths.append(path)
    return paths
