"""PSF measurements, resolution formulas and range cuts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import ApertureScan, ChirpConfig
from .rma import ImageVolume

HALF_POWER = 1.0 / math.sqrt(2.0)  # -3 dB on a magnitude profile
CENSUS_FLOOR_DB = -10.0
CENSUS_DIP_DB = 3.0


@dataclass
class PsfReport:
    peak_position: tuple[float, float, float]
    peak_value: float
    width_x: float | None
    width_y: float | None
    width_z: float | None
    sidelobe_ratio: float
    z_peaks: list[float] = field(default_factory=list)

    def to_text(self) -> str:
        def fmt(v):
            return "unmeasurable" if v is None else f"{v:.9g}"
        lines = [
            f"peak_x_m: {self.peak_position[0]:.9g}",
            f"peak_y_m: {self.peak_position[1]:.9g}",
            f"peak_z_m: {self.peak_position[2]:.9g}",
            f"peak_value: {self.peak_value:.9g}",
            f"width_x_m: {fmt(self.width_x)}",
            f"width_y_m: {fmt(self.width_y)}",
            f"width_z_m: {fmt(self.width_z)}",
            f"sidelobe_ratio_db: {self.sidelobe_ratio:.6g}",
            "z_peaks_m: " + ", ".join(f"{z:.9g}" for z in self.z_peaks),
        ]
        return "\n".join(lines) + "\n"


def _parabolic_offset(a: float, b: float, c: float) -> float:
    denom = a - 2.0 * b + c
    if denom == 0.0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))


def _half_width(profile: np.ndarray, i: int, level: float, direction: int) -> float | None:
    """Distance in samples from index i to the first crossing of ``level``."""
    j = i
    while 0 <= j + direction < profile.size:
        nxt = j + direction
        if profile[nxt] <= level:
            # linear interpolation between j (above) and nxt (at/below)
            frac = (profile[j] - level) / (profile[j] - profile[nxt])
            return abs(j - i) + frac
        j = nxt
    return None


def minus3db_width(profile: np.ndarray, i: int, pitch: float) -> float | None:
    """-3 dB full width of a magnitude profile around its peak at index i.

    Never narrower than one sample pitch; None when a side runs off the end.
    """
    level = profile[i] * HALF_POWER
    left = _half_width(profile, i, level, -1)
    right = _half_width(profile, i, level, +1)
    if left is None or right is None:
        return None
    return max(left + right, 1.0) * pitch


def _main_lobe_box(mag: np.ndarray, peak: tuple[int, ...]) -> list[slice]:
    box = []
    for ax in range(3):
        idx = list(peak)
        idx[ax] = slice(None)
        prof = mag[tuple(idx)]
        i = peak[ax]
        lo = i
        while lo > 0 and prof[lo - 1] < prof[lo]:
            lo -= 1
        hi = i
        while hi < prof.size - 1 and prof[hi + 1] < prof[hi]:
            hi += 1
        box.append(slice(lo, hi + 1))
    return box


def sidelobe_ratio_db(mag: np.ndarray, peak: tuple[int, ...]) -> float:
    """Peak over the largest local maximum outside the main lobe, in dB.

    The main lobe is the box bounded by the first minima along each axis
    through the peak. Returns inf when nothing lies outside it.
    """
    local = (mag == ndimage.maximum_filter(mag, size=3, mode="nearest")) & (mag > 0)
    local[tuple(_main_lobe_box(mag, peak))] = False
    if not local.any():
        return math.inf
    return float(20.0 * np.log10(mag[peak] / mag[local].max()))


def peak_census(profile: np.ndarray, floor_db: float = CENSUS_FLOOR_DB,
                dip_db: float = CENSUS_DIP_DB) -> list[int]:
    """Indices of distinct peaks in a magnitude profile.

    Candidates are local maxima within ``floor_db`` of the global maximum.
    Two neighbouring candidates count as distinct only when the profile dips
    at least ``dip_db`` below the smaller of them in between; otherwise the
    larger one absorbs the other.
    """
    prof = np.asarray(profile, dtype=np.float64)
    if prof.size == 0 or prof.max() <= 0:
        return []
    floor = prof.max() * 10.0 ** (floor_db / 20.0)
    cand = [i for i in range(prof.size)
            if prof[i] >= floor
            and (i == 0 or prof[i] >= prof[i - 1])
            and (i == prof.size - 1 or prof[i] > prof[i + 1])]
    dip = 10.0 ** (-dip_db / 20.0)
    peaks: list[int] = []
    for i in cand:
        if peaks:
            j = peaks[-1]
            valley = prof[j:i + 1].min()
            if valley > dip * min(prof[i], prof[j]):
                if prof[i] > prof[j]:
                    peaks[-1] = i
                continue
        peaks.append(i)
    return peaks


def z_profile(volume: ImageVolume) -> np.ndarray:
    """Maximum magnitude over each constant-z plane."""
    return np.abs(volume.data).max(axis=(0, 1))


def psf_metrics(volume: ImageVolume) -> PsfReport:
    mag = np.abs(volume.data)
    peak = np.unravel_index(np.argmax(mag), mag.shape)
    if mag[peak] <= 0:
        raise ValueError("volume has no nonzero voxel")
    pos, widths = [], []
    for ax in range(3):
        idx = list(peak)
        idx[ax] = slice(None)
        prof = mag[tuple(idx)]
        i = peak[ax]
        off = 0.0
        if 0 < i < prof.size - 1:
            off = _parabolic_offset(prof[i - 1], prof[i], prof[i + 1])
        pos.append(volume.origin[ax] + (i + off) * volume.spacing[ax])
        widths.append(minus3db_width(prof, i, volume.spacing[ax]))
    zp = z_profile(volume)
    z_peaks = [float(volume.origin[2] + i * volume.spacing[2]) for i in peak_census(zp)]
    return PsfReport(tuple(pos), float(mag[peak]), *widths,
                     sidelobe_ratio=sidelobe_ratio_db(mag, peak), z_peaks=z_peaks)


@dataclass(frozen=True)
class Resolution:
    dz: float
    dx: float | None
    dy: float | None


def theoretical_resolution(chirp: ChirpConfig, scan: ApertureScan, range_z: float) -> Resolution:
    """dz = c/(2B); dx, dy = lambda0 * range / (2 * aperture extent)."""
    if not range_z > 0:
        raise ValueError("range must be positive")
    dx_ext, dy_ext = scan.extent
    lam = chirp.wavelength

    def cross(extent):
        return lam * range_z / (2.0 * extent) if extent > 0 else None

    return Resolution(chirp.c / (2.0 * chirp.bandwidth), cross(dx_ext), cross(dy_ext))


@dataclass(frozen=True)
class RangeCut:
    z: float
    index: int
    image: np.ndarray  # |p| over [ix, iy]


def nearest_z_index(volume: ImageVolume, z: float) -> int:
    z_axis = volume.z
    lo, hi = z_axis[0], z_axis[-1]
    tol = 1e-9 * max(1.0, abs(lo), abs(hi))
    if not (lo - tol <= z <= hi + tol):
        raise ValueError(f"z = {z} m outside volume extent [{lo}, {hi}] m")
    u = (z - volume.origin[2]) / volume.spacing[2]
    # round half down: ties go to the smaller z
    i = int(math.ceil(u - 0.5))
    return min(max(i, 0), z_axis.size - 1)


def range_cuts(volume: ImageVolume, z_values) -> list[RangeCut]:
    cuts = []
    for z in z_values:
        i = nearest_z_index(volume, float(z))
        cuts.append(RangeCut(float(volume.z[i]), i, np.abs(volume.data[:, :, i])))
    return cuts


def count_blobs(image: np.ndarray, rel_db: float = -6.0) -> int:
    """Connected regions of an image above ``rel_db`` of its maximum."""
    mask = image >= image.max() * 10.0 ** (rel_db / 20.0)
    _, n = ndimage.label(mask)
    return int(n)
