"""Point-scatterer scenes and the beat-signal forward model."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .geometry import ApertureScan, ArrayLayout, ChirpConfig, element_positions, wavenumber_axis


@dataclass(frozen=True)
class PointScatterer:
    position: tuple[float, float, float]
    reflectivity: complex = 1.0

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise ValueError(f"scatterer position must be 3 finite values, got {self.position}")
        p = complex(self.reflectivity)
        if not (math.isfinite(p.real) and math.isfinite(p.imag)):
            raise ValueError("reflectivity must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "reflectivity", p)


@dataclass(frozen=True)
class Scene:
    scatterers: tuple[PointScatterer, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))

    def __len__(self):
        return len(self.scatterers)

    def __or__(self, other: "Scene") -> "Scene":
        return Scene(self.scatterers + other.scatterers)

    def scaled(self, alpha: complex) -> "Scene":
        return Scene(tuple(replace(s, reflectivity=alpha * s.reflectivity) for s in self.scatterers))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Positions (n, 3) and reflectivities (n,) as numpy arrays."""
        pos = np.array([s.position for s in self.scatterers], dtype=np.float64).reshape(-1, 3)
        refl = np.array([s.reflectivity for s in self.scatterers], dtype=np.complex128)
        return pos, refl


@dataclass
class BeatCube:
    """Beat samples indexed [ix_scan, iy_scan, channel, sample].

    ``data`` is complex128 after simulation and complex64 after reading a
    file; both are accepted everywhere.
    """

    data: np.ndarray
    chirp: ChirpConfig
    scan: ApertureScan
    layout: ArrayLayout

    def __post_init__(self):
        expected = (self.scan.nx, self.scan.ny, self.layout.n_channels, self.chirp.n_samples)
        if self.data.shape != expected:
            raise ValueError(f"cube shape {self.data.shape} does not match geometry {expected}")
        if not np.iscomplexobj(self.data):
            raise ValueError("cube data must be complex")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("cube contains non-finite samples")

    @property
    def wavenumbers(self) -> np.ndarray:
        return wavenumber_axis(self.chirp)


def simulate_beat(scene: Scene, chirp: ChirpConfig, scan: ApertureScan, layout: ArrayLayout,
                  spreading: bool = False, wavenumbers: np.ndarray | None = None) -> BeatCube:
    """Synthesize the beat cube sum_t p_t exp(+j k (R_T + R_R)).

    In effective-monostatic mode both ranges are measured from the channel's
    phase centre. ``spreading`` adds a 1/(R_T R_R) amplitude factor.
    ``wavenumbers`` overrides the chirp's k axis (the cube still carries the
    chirp for metadata).
    """
    k = wavenumber_axis(chirp) if wavenumbers is None else np.asarray(wavenumbers, dtype=np.float64)
    if k.size == 0:
        raise ValueError("empty wavenumber axis")
    pos, refl = scene.arrays()
    bad = pos[:, 2] <= scan.z_plane
    if bad.any():
        first = scene.scatterers[int(np.argmax(bad))]
        raise ValueError(f"scatterer at {first.position} is not in front of the aperture plane "
                         f"z = {scan.z_plane}")
    tx, rx = element_positions(scan, layout)
    data = _kernels.beat(tx, rx, pos, refl, k, spreading)
    shape = (scan.nx, scan.ny, layout.n_channels, k.size)
    return BeatCube(data.reshape(shape), chirp, scan, layout)


def add_noise(cube: BeatCube, snr_db: float, seed: int) -> BeatCube:
    """Add circular complex white Gaussian noise at the given SNR.

    Noise power is mean(|s|^2) / 10^(snr_db/10). Samples come from
    ``numpy.random.default_rng(seed)`` (PCG64): real parts first, then
    imaginary parts, each a full standard-normal array of the cube's shape.
    ``snr_db = inf`` returns an unchanged copy.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return replace(cube, data=cube.data.copy())
    signal_power = float(np.mean(np.abs(cube.data) ** 2))
    if signal_power == 0.0:
        raise ValueError("SNR is undefined for an all-zero cube")
    noise_power = signal_power / 10.0 ** (snr_db / 10.0)
    rng = np.random.default_rng(seed)
    scale = math.sqrt(noise_power / 2.0)
    noise = scale * (rng.standard_normal(cube.data.shape) + 1j * rng.standard_normal(cube.data.shape))
    return replace(cube, data=cube.data + noise)
