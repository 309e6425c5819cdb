"""Waveform, array and aperture geometry.

Everything here is in SI units (m, s, Hz, rad/m). The objects are frozen
dataclasses; the numpy arrays they hold are made read-only on construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

MONOSTATIC = "effective-monostatic"
BISTATIC = "bistatic"
MODES = (MONOSTATIC, BISTATIC)


def _frozen(values, width: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1, width)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ChirpConfig:
    """FMCW chirp parameters.

    Attributes:
        f0: start frequency (Hz).
        slope_k: chirp rate (Hz/s).
        t_chirp: chirp duration (s).
        n_samples: fast-time samples per chirp.
        f_sample: ADC sampling rate (Hz).
        c: propagation speed (m/s).
    """

    f0: float
    slope_k: float
    t_chirp: float
    n_samples: int
    f_sample: float
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if not self.f0 > 0:
            raise ValueError(f"f0 must be positive, got {self.f0}")
        if not self.slope_k > 0:
            raise ValueError(f"slope_k must be positive, got {self.slope_k}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise ValueError(f"n_samples must be an integer >= 2, got {self.n_samples}")
        if not self.f_sample > 0 or not self.c > 0:
            raise ValueError("f_sample and c must be positive")
        # small slack so that n/fs == T computed in floating point is accepted
        if self.n_samples / self.f_sample > self.t_chirp * (1 + 1e-12):
            raise ValueError(
                f"sampling window {self.n_samples / self.f_sample:.6g} s exceeds "
                f"chirp duration {self.t_chirp:.6g} s"
            )
        if not self.bandwidth > 0:
            raise ValueError("sampled bandwidth must be positive")

    @property
    def bandwidth(self) -> float:
        """Swept bandwidth over the sampled window (Hz)."""
        return self.slope_k * (self.n_samples - 1) / self.f_sample

    @property
    def wavelength(self) -> float:
        """Wavelength at the start frequency (m)."""
        return self.c / self.f0


def chirp_77ghz(n_samples: int = 256, slope_k: float = 70.295e12,
                f_end: float = 80.5e9) -> ChirpConfig:
    """77 GHz chirp whose sampled window spans up to ``f_end``.

    The sampling rate is chosen so the sampled sweep covers exactly
    ``f_end - 77 GHz`` at the given slope. The chirp lasts 56 us unless a
    very short sample count needs a longer window.
    """
    f0 = 77e9
    f_sample = slope_k * (n_samples - 1) / (f_end - f0)
    t_chirp = max(56e-6, n_samples / f_sample)
    return ChirpConfig(f0=f0, slope_k=slope_k, t_chirp=t_chirp,
                       n_samples=n_samples, f_sample=f_sample)


def wavenumber_axis(chirp: ChirpConfig) -> np.ndarray:
    """k_n = 2*pi*(f0 + K*n/fs)/c for each fast-time sample n."""
    n = np.arange(chirp.n_samples, dtype=np.float64)
    freq = chirp.f0 + chirp.slope_k * n / chirp.f_sample
    return 2.0 * np.pi * freq / chirp.c


def bandwidth_and_wavelength(chirp: ChirpConfig) -> tuple[float, float]:
    return chirp.bandwidth, chirp.wavelength


@dataclass(frozen=True)
class ArrayLayout:
    """Transmitter and receiver offsets from the sensor reference point.

    Offsets are (x, y) pairs in metres. In effective-monostatic mode each
    Tx/Rx pair is modelled as one transceiver at the pair midpoint.
    """

    tx_offsets: np.ndarray
    rx_offsets: np.ndarray
    mode: str = MONOSTATIC

    def __post_init__(self):
        object.__setattr__(self, "tx_offsets", _frozen(self.tx_offsets, 2))
        object.__setattr__(self, "rx_offsets", _frozen(self.rx_offsets, 2))
        if len(self.tx_offsets) == 0 or len(self.rx_offsets) == 0:
            raise ValueError("layout needs at least one transmitter and one receiver")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def n_channels(self) -> int:
        return len(self.tx_offsets) * len(self.rx_offsets)

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Tx and Rx offsets of every virtual channel, Tx-major (TDM order)."""
        ntx, nrx = len(self.tx_offsets), len(self.rx_offsets)
        tx = np.repeat(self.tx_offsets, nrx, axis=0)
        rx = np.tile(self.rx_offsets, (ntx, 1))
        return tx, rx

    def __eq__(self, other):
        if not isinstance(other, ArrayLayout):
            return NotImplemented
        return (self.mode == other.mode
                and np.array_equal(self.tx_offsets, other.tx_offsets)
                and np.array_equal(self.rx_offsets, other.rx_offsets))

    __hash__ = None


def single_transceiver() -> ArrayLayout:
    return ArrayLayout([(0.0, 0.0)], [(0.0, 0.0)], MONOSTATIC)


def linear_mimo_layout(n_tx: int, n_rx: int, wavelength: float,
                       mode: str = MONOSTATIC) -> ArrayLayout:
    """Sparse Tx / dense Rx line along y giving n_tx*n_rx channels at wavelength/2.

    Receivers sit ``wavelength`` apart and transmitters ``n_rx * wavelength``
    apart, so the midpoints interleave without overlap. ``n_tx=2, n_rx=43``
    gives an 86-channel virtual array.
    """
    rx = [(0.0, r * wavelength) for r in range(n_rx)]
    tx = [(0.0, t * n_rx * wavelength) for t in range(n_tx)]
    return ArrayLayout(tx, rx, mode)


def virtual_channels(layout: ArrayLayout) -> np.ndarray:
    """Phase-centre offsets (Tx/Rx midpoints), shape (n_channels, 2)."""
    tx, rx = layout.pairs()
    return 0.5 * (tx + rx)


@dataclass(frozen=True)
class ApertureScan:
    """Raster of sensor reference positions on the plane z = z_plane.

    ``origin`` is the (x, y) of the first scan position; position (ix, iy)
    is ``origin + (ix*dx, iy*dy)``.
    """

    nx: int
    ny: int
    dx: float
    dy: float
    origin: tuple[float, float] = (0.0, 0.0)
    z_plane: float = 0.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("scan needs at least one position per axis")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("scan steps must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def extent(self) -> tuple[float, float]:
        """Aperture extents (Dx, Dy) in metres."""
        return (self.nx - 1) * self.dx, (self.ny - 1) * self.dy

    def positions(self) -> np.ndarray:
        """Scan positions, shape (nx, ny, 3)."""
        x = self.origin[0] + self.dx * np.arange(self.nx)
        y = self.origin[1] + self.dy * np.arange(self.ny)
        pos = np.empty((self.nx, self.ny, 3))
        pos[..., 0] = x[:, None]
        pos[..., 1] = y[None, :]
        pos[..., 2] = self.z_plane
        return pos


def centered_scan(nx: int, ny: int, dx: float, dy: float | None = None,
                  z_plane: float = 0.0) -> ApertureScan:
    """Scan whose grid contains x = y = 0 at index (nx//2, ny//2)."""
    dy = dx if dy is None else dy
    return ApertureScan(nx, ny, dx, dy, (-(nx // 2) * dx, -(ny // 2) * dy), z_plane)


def element_positions(scan: ApertureScan, layout: ArrayLayout) -> tuple[np.ndarray, np.ndarray]:
    """Absolute Tx and Rx positions for every (scan position, channel).

    Returns two arrays of shape (nx*ny*n_channels, 3) in C order over
    (ix, iy, channel). In monostatic mode both arrays hold the phase centre.
    """
    pos = scan.positions().reshape(-1, 1, 3)
    if layout.mode == MONOSTATIC:
        vc = virtual_channels(layout)
        tx_off = rx_off = vc
    else:
        tx_off, rx_off = layout.pairs()
    tx = np.repeat(pos, layout.n_channels, axis=1).copy()
    rx = tx.copy()
    tx[..., :2] += tx_off[None]
    rx[..., :2] += rx_off[None]
    return tx.reshape(-1, 3), rx.reshape(-1, 3)


def range_resolution(chirp: ChirpConfig) -> float:
    return chirp.c / (2.0 * chirp.bandwidth)


def unambiguous_range(chirp: ChirpConfig) -> float:
    """Largest two-way range resolvable by the fast-time sampling (m)."""
    dk = 2.0 * math.pi * chirp.slope_k / (chirp.f_sample * chirp.c)
    return math.pi / dk
