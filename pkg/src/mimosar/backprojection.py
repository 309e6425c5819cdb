"""Exact time-domain backprojection, the adjoint of the forward model.

Every voxel gets sum over scan positions, channels and wavenumbers of
s * exp(-j k (R_T + R_R)) with exact distances. It is O(voxels x samples) on
purpose; it is the reference the Fourier pipeline is checked against.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import element_positions
from .rma import ImageVolume
from .scene import BeatCube


@dataclass(frozen=True)
class VoxelGrid:
    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]

    @classmethod
    def like(cls, volume: ImageVolume) -> "VoxelGrid":
        return cls(volume.shape, volume.spacing, volume.origin)


def backproject(cube: BeatCube, grid: VoxelGrid) -> ImageVolume:
    if any(n < 1 for n in grid.shape) or len(grid.shape) != 3:
        raise ValueError(f"voxel grid must have at least one voxel per axis, got {grid.shape}")
    empty = ImageVolume(np.zeros(grid.shape, dtype=np.complex128), grid.spacing, grid.origin)
    voxels = empty.voxel_positions()
    tx, rx = element_positions(cube.scan, cube.layout)
    data = np.ascontiguousarray(cube.data.reshape(tx.shape[0], -1), dtype=np.complex128)
    values = _kernels.backproject(voxels, tx, rx, cube.wavenumbers, data)
    empty.data[...] = values.reshape(grid.shape)
    empty.meta.update(method="backprojection", mode=cube.layout.mode)
    return empty


@dataclass(frozen=True)
class VolumeComparison:
    peak_offset_voxels: tuple[int, int, int]
    normalized_correlation: float


def compare_volumes(a: ImageVolume, b: ImageVolume) -> VolumeComparison:
    """Magnitude correlation and peak offset (argmax a - argmax b) in voxels."""
    return compare_arrays(a.data, b.data)


def compare_arrays(a: np.ndarray, b: np.ndarray) -> VolumeComparison:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    ma, mb = np.abs(a), np.abs(b)
    na, nb = np.linalg.norm(ma), np.linalg.norm(mb)
    if na == 0 or nb == 0:
        raise ValueError("cannot correlate a zero-norm volume")
    corr = float(abs(np.vdot(ma, mb)) / (na * nb))
    pa = np.unravel_index(np.argmax(ma), ma.shape)
    pb = np.unravel_index(np.argmax(mb), mb.shape)
    return VolumeComparison(tuple(int(i - j) for i, j in zip(pa, pb)), corr)
