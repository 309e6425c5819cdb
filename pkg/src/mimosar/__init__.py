"""FMCW MIMO-SAR simulation and omega-k 3D reconstruction."""
from .geometry import (
    ApertureScan, ArrayLayout, ChirpConfig, SPEED_OF_LIGHT, bandwidth_and_wavelength,
    centered_scan, linear_mimo_layout, chirp_77ghz, single_transceiver, virtual_channels,
    wavenumber_axis,
)
from .scene import BeatCube, PointScatterer, Scene, add_noise, simulate_beat
from .rma import ImageVolume, KSpaceSpectrum, reconstruct
from .backprojection import VoxelGrid, backproject, compare_volumes
from .analysis import PsfReport, psf_metrics, range_cuts, theoretical_resolution

__version__ = "0.1.0"

__all__ = [
    "ApertureScan", "ArrayLayout", "ChirpConfig", "SPEED_OF_LIGHT", "bandwidth_and_wavelength",
    "centered_scan", "linear_mimo_layout", "chirp_77ghz", "single_transceiver",
    "virtual_channels", "wavenumber_axis",
    "BeatCube", "PointScatterer", "Scene", "add_noise", "simulate_beat",
    "ImageVolume", "KSpaceSpectrum", "reconstruct",
    "VoxelGrid", "backproject", "compare_volumes",
    "PsfReport", "psf_metrics", "range_cuts", "theoretical_resolution",
]
