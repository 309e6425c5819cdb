"""Range-migration (omega-k) reconstruction.

Pipeline: collapse the virtual array onto a monostatic grid, 2D FFT over the
aperture, Stolt-resample every (kx, ky) bin onto a shared uniform kz grid,
multiply by the reference phase exp(-j kz z0) and inverse-FFT in 3D.

FFT conventions: the aperture transform is numpy's unnormalized forward FFT,
the final transform is ``numpy.fft.ifftn`` (1/N per axis). Spectra are kept
in FFT order (no fftshift).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .geometry import virtual_channels
from .scene import BeatCube

GRID_TOL = 1e-9
PRE_STOLT = "pre-stolt"
POST_STOLT = "post-stolt"
WINDOWS = ("none", "hann", "hamming")


@dataclass
class MonostaticGrid:
    """Beat samples s(x0, y0, k) on a uniform grid of phase centres."""

    data: np.ndarray  # [ix, iy, k]
    k: np.ndarray
    dx: float
    dy: float
    origin: tuple[float, float]
    z_plane: float

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + self.dx * np.arange(self.data.shape[0])

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + self.dy * np.arange(self.data.shape[1])


@dataclass
class KSpaceSpectrum:
    """Spectrum indexed [ikx, iky, ik or ikz], FFT order along kx and ky.

    ``z_ref`` is the z coordinate that index 0 of the eventual volume maps
    to; it starts at the aperture plane and moves with the reference phase.
    """

    data: np.ndarray
    kx_axis: np.ndarray
    ky_axis: np.ndarray
    third_axis: np.ndarray
    stage: str
    dx: float
    dy: float
    origin: tuple[float, float]
    z_ref: float
    meta: dict = field(default_factory=dict)


@dataclass
class ImageVolume:
    """Complex reflectivity indexed [ix, iy, iz] on a uniform voxel grid."""

    data: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError("volume data must be 3-D")
        if not all(s > 0 for s in self.spacing):
            raise ValueError(f"voxel spacings must be positive, got {self.spacing}")
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = tuple(float(o) for o in self.origin)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + self.spacing[i] * np.arange(self.data.shape[i])

    @property
    def x(self) -> np.ndarray:
        return self.axis(0)

    @property
    def y(self) -> np.ndarray:
        return self.axis(1)

    @property
    def z(self) -> np.ndarray:
        return self.axis(2)

    def voxel_positions(self) -> np.ndarray:
        """All voxel centres, shape (nx*ny*nz, 3), C order."""
        gx, gy, gz = np.meshgrid(self.x, self.y, self.z, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    def index_of(self, point) -> tuple[int, int, int]:
        """Nearest voxel index to a point (not clipped)."""
        return tuple(int(round((point[i] - self.origin[i]) / self.spacing[i])) for i in range(3))


def _axis_indices(values: np.ndarray, fallback_step: float):
    """Index uniform positions; returns (indices, origin, step) or the first bad entry."""
    vmin, vmax = values.min(), values.max()
    if vmax - vmin <= GRID_TOL:
        return np.zeros(values.shape, dtype=np.int64), float(vmin), fallback_step, None
    s = np.sort(values)
    gaps = np.diff(s)
    step0 = gaps[gaps > GRID_TOL].min()
    n = int(round((vmax - vmin) / step0))
    step = (vmax - vmin) / n
    idx = np.rint((values - vmin) / step).astype(np.int64)
    bad = np.abs(values - (vmin + idx * step)) > GRID_TOL
    first_bad = int(np.argmax(bad)) if bad.any() else None
    return idx, float(vmin), float(step), first_bad


def collapse_virtual_array(cube: BeatCube) -> MonostaticGrid:
    """Place every (scan position, channel) sample at its phase centre.

    Phase centres are Tx/Rx midpoints regardless of the layout's mode, so a
    bistatic cube is imaged under the effective-monostatic approximation.
    Raises ValueError if the centres do not tile a uniform grid exactly once.
    """
    scan = cube.scan
    vc = virtual_channels(cube.layout)
    pc = scan.positions()[:, :, None, :2] + vc[None, None, :, :]
    pc = pc.reshape(-1, 2)
    ix, x0, dx, bad_x = _axis_indices(pc[:, 0], scan.dx)
    iy, y0, dy, bad_y = _axis_indices(pc[:, 1], scan.dy)
    for bad in (bad_x, bad_y):
        if bad is not None:
            raise ValueError(f"phase centre {tuple(pc[bad])} (measurement {bad}) "
                             f"is off the uniform grid")
    nx, ny = int(ix.max()) + 1, int(iy.max()) + 1
    flat = ix * ny + iy
    order = np.argsort(flat, kind="stable")
    dup = np.flatnonzero(np.diff(flat[order]) == 0)
    if dup.size:
        m = int(order[dup[0] + 1])
        raise ValueError(f"phase centre {tuple(pc[m])} (measurement {m}) overlaps another channel")
    if flat.size != nx * ny:
        filled = np.zeros(nx * ny, dtype=bool)
        filled[flat] = True
        hole = int(np.argmin(filled))
        raise ValueError(f"phase centres leave grid point "
                         f"({x0 + (hole // ny) * dx}, {y0 + (hole % ny) * dy}) empty")
    src = cube.data.reshape(-1, cube.chirp.n_samples)
    data = np.empty((nx, ny, src.shape[1]), dtype=np.complex128)
    data.reshape(-1, src.shape[1])[flat] = src
    return MonostaticGrid(data, cube.wavenumbers, dx, dy, (x0, y0), scan.z_plane)


def aperture_window(name: str | None, nx: int, ny: int) -> np.ndarray:
    """Separable raised-cosine taper over the aperture (all ones for "none")."""
    name = (name or "none").lower()
    if name not in WINDOWS:
        raise ValueError(f"unknown window {name!r}; choose from {WINDOWS}")
    if name == "none":
        return np.ones((nx, ny))
    fn = np.hanning if name == "hann" else np.hamming
    return np.outer(fn(nx), fn(ny))


def _pad_factors(zero_pad) -> tuple[int, int]:
    if np.isscalar(zero_pad):
        zero_pad = (zero_pad, zero_pad)
    px, py = (int(p) for p in zero_pad)
    if px < 1 or py < 1 or (px, py) != tuple(zero_pad):
        raise ValueError(f"zero_pad must be integers >= 1, got {zero_pad}")
    return px, py


def aperture_fft(grid: MonostaticGrid, zero_pad=1) -> KSpaceSpectrum:
    """Unnormalized 2D FFT over (x0, y0) for every k slice.

    Zero padding appends zeros after the last aperture sample, which widens
    the imaged x/y field of view without changing the voxel pitch.
    """
    px, py = _pad_factors(zero_pad)
    nx, ny = grid.data.shape[:2]
    npx, npy = nx * px, ny * py
    spec = np.fft.fft2(grid.data, s=(npx, npy), axes=(0, 1))
    kx = 2.0 * np.pi * np.fft.fftfreq(npx, d=grid.dx)
    ky = 2.0 * np.pi * np.fft.fftfreq(npy, d=grid.dy)
    return KSpaceSpectrum(spec, kx, ky, np.asarray(grid.k, dtype=np.float64), PRE_STOLT,
                          grid.dx, grid.dy, grid.origin, grid.z_plane,
                          {"zero_pad": (px, py), "aperture_shape": (nx, ny)})


def dispersion_kz(kx, ky, k):
    """kz = sqrt(4k^2 - kx^2 - ky^2); NaN marks an evanescent combination."""
    arg = 4.0 * np.asarray(k, dtype=np.float64) ** 2 - np.asarray(kx) ** 2 - np.asarray(ky) ** 2
    kz = np.sqrt(np.where(arg >= 0.0, arg, np.nan))
    return float(kz) if kz.ndim == 0 else kz


def is_evanescent(kz) -> np.ndarray | bool:
    return np.isnan(kz)


def kz_grid_bounds(kx: np.ndarray, ky: np.ndarray, k: np.ndarray) -> tuple[float, float]:
    """Support of the shared kz grid over the whole spectrum."""
    kx_max = float(np.abs(kx).max())
    ky_max = float(np.abs(ky).max())
    lo = math.sqrt(max(0.0, 4.0 * float(k[0]) ** 2 - kx_max ** 2 - ky_max ** 2))
    return lo, 2.0 * float(k[-1])


def auto_nz(kx: np.ndarray, ky: np.ndarray, k: np.ndarray) -> int:
    """Smallest nz whose kz step does not exceed the on-axis source step 2*dk.

    This keeps the full unambiguous range of the fast-time sampling inside
    the reconstructed volume.
    """
    lo, hi = kz_grid_bounds(kx, ky, k)
    dk = float(np.diff(k).min())
    return max(2, int(math.ceil((hi - lo) / (2.0 * dk))) + 1)


def stolt_resample(spec: KSpaceSpectrum, nz: int, z_extent: float | None = None) -> KSpaceSpectrum:
    """Resample every bin from its nonuniform kz nodes onto a uniform kz grid.

    Linear interpolation of complex values; zero outside a bin's own support
    and in fully evanescent bins. If ``z_extent`` is given and the grid's
    unambiguous z range 2*pi/dkz is shorter, a warning is stored in
    ``meta["warnings"]``.
    """
    if spec.stage != PRE_STOLT:
        raise ValueError("stolt_resample expects a pre-stolt spectrum")
    k = np.asarray(spec.third_axis, dtype=np.float64)
    if k.size < 2 or not np.all(np.diff(k) > 0):
        raise ValueError("k axis must be strictly increasing with at least two samples")
    if nz < 2:
        raise ValueError("nz must be at least 2")
    lo, hi = kz_grid_bounds(spec.kx_axis, spec.ky_axis, k)
    kz = np.linspace(lo, hi, int(nz))
    data = _kernels.stolt(np.ascontiguousarray(spec.data, dtype=np.complex128),
                          spec.kx_axis, spec.ky_axis, k, kz)
    meta = dict(spec.meta)
    warnings = list(meta.get("warnings", []))
    dkz = kz[1] - kz[0]
    if z_extent is not None and 2.0 * np.pi / dkz < z_extent:
        warnings.append(f"nz={nz} gives an unambiguous z range of {2 * np.pi / dkz:.4g} m, "
                        f"shorter than the requested {z_extent:.4g} m")
    meta.update(nz=int(nz), warnings=warnings)
    return replace(spec, data=data, third_axis=kz, stage=POST_STOLT, meta=meta)


def apply_reference_phase(spec: KSpaceSpectrum, z0: float) -> KSpaceSpectrum:
    """Multiply by exp(-j kz z0); the volume z origin moves by -z0."""
    if spec.stage != POST_STOLT:
        raise ValueError("reference phase applies to a post-stolt spectrum")
    phase = np.exp(-1j * spec.third_axis * z0)
    meta = dict(spec.meta, z0=float(z0))
    return replace(spec, data=spec.data * phase[None, None, :], z_ref=spec.z_ref - z0, meta=meta)


def _kz_step(kz: np.ndarray) -> float:
    return (kz[-1] - kz[0]) / (kz.size - 1)


def inverse_fft_3d(spec: KSpaceSpectrum) -> ImageVolume:
    """3D inverse DFT to a voxel volume.

    The kz grid starts at kz[0], not zero, so the z transform is followed by
    the carrier exp(j kz[0] z) to make the result the true inverse transform
    over the physical kz values.
    """
    if spec.stage != POST_STOLT:
        raise ValueError("inverse_fft_3d expects a post-stolt spectrum")
    kz = spec.third_axis
    nz = kz.size
    dkz = _kz_step(kz)
    dz = 2.0 * np.pi / (nz * dkz)
    vol = np.fft.ifftn(spec.data)
    z_local = dz * np.arange(nz)
    vol *= np.exp(1j * kz[0] * z_local)[None, None, :]
    return ImageVolume(vol, (spec.dx, spec.dy, dz), (spec.origin[0], spec.origin[1], spec.z_ref),
                       dict(spec.meta))


def forward_fft_3d(volume: ImageVolume, kz_start: float = 0.0) -> KSpaceSpectrum:
    """Exact inverse of :func:`inverse_fft_3d` for a volume and kz grid start."""
    nx, ny, nz = volume.shape
    dx, dy, dz = volume.spacing
    z_local = dz * np.arange(nz)
    data = np.fft.fftn(volume.data * np.exp(-1j * kz_start * z_local)[None, None, :])
    dkz = 2.0 * np.pi / (nz * dz)
    kz = kz_start + dkz * np.arange(nz)
    kx = 2.0 * np.pi * np.fft.fftfreq(nx, d=dx)
    ky = 2.0 * np.pi * np.fft.fftfreq(ny, d=dy)
    return KSpaceSpectrum(data, kx, ky, kz, POST_STOLT, dx, dy, volume.origin[:2],
                          volume.origin[2])


def reconstruct(cube: BeatCube, nz: int | None = None, zero_pad=1, window: str | None = None,
                z0: float | None = None, z_extent: float | None = None) -> ImageVolume:
    """Full omega-k reconstruction of a beat cube.

    The forward model carries exp(+j 2kR), so the collapsed samples are
    conjugated (the matched-filter sign) before the aperture FFT. With the
    default ``z0`` (the aperture plane z) the volume z axis is absolute.
    ``nz=None`` picks :func:`auto_nz`.
    """
    grid = collapse_virtual_array(cube)
    win = aperture_window(window, *grid.data.shape[:2])
    grid = replace(grid, data=np.conj(grid.data) * win[:, :, None])
    spec = aperture_fft(grid, zero_pad)
    if nz is None:
        nz = auto_nz(spec.kx_axis, spec.ky_axis, spec.third_axis)
    spec = stolt_resample(spec, nz, z_extent)
    z0 = cube.scan.z_plane if z0 is None else z0
    spec = apply_reference_phase(spec, z0)
    vol = inverse_fft_3d(spec)
    vol.meta.update(method="rma", nz=int(nz), zero_pad=list(_pad_factors(zero_pad)),
                    window=(window or "none").lower(), z0=float(z0),
                    kz_range=[float(spec.third_axis[0]), float(spec.third_axis[-1])])
    return vol
