import bisect
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mimosar.geometry import (
    ApertureScan, ArrayLayout, centered_scan, linear_mimo_layout, chirp_77ghz,
    single_transceiver, wavenumber_axis,
)
from mimosar.rma import (
    POST_STOLT, PRE_STOLT, ImageVolume, KSpaceSpectrum, MonostaticGrid, aperture_fft,
    apply_reference_phase, collapse_virtual_array, dispersion_kz, forward_fft_3d,
    inverse_fft_3d, kz_grid_bounds, reconstruct, stolt_resample,
)
from mimosar.scene import BeatCube, PointScatterer, Scene, simulate_beat

from conftest import peak_index

K0 = 1613.80


def _cube(data, chirp, scan, layout):
    return BeatCube(np.asarray(data, dtype=np.complex128), chirp, scan, layout)


# ---------------------------------------------------------------- collapse

def test_collapse_identity_for_single_transceiver(rng):
    chirp = chirp_77ghz(8)
    scan = ApertureScan(5, 4, 2e-3, 3e-3, (0.01, -0.02))
    data = rng.normal(size=(5, 4, 1, 8)) + 1j * rng.normal(size=(5, 4, 1, 8))
    grid = collapse_virtual_array(_cube(data, chirp, scan, single_transceiver()))
    np.testing.assert_array_equal(grid.data, data[:, :, 0, :])
    assert grid.dx == pytest.approx(2e-3) and grid.dy == pytest.approx(3e-3)
    assert grid.origin == pytest.approx((0.01, -0.02))


def test_collapse_interleaves_mimo_channels(rng):
    chirp = chirp_77ghz(4)
    lam = chirp.wavelength
    layout = ArrayLayout([(0, 0)], [(0, 0), (0, lam)])
    scan = ApertureScan(3, 5, 2e-3, lam)
    data = rng.normal(size=(3, 5, 2, 4)) + 0j
    grid = collapse_virtual_array(_cube(data, chirp, scan, layout))
    assert grid.data.shape == (3, 10, 4)
    assert grid.dy == pytest.approx(lam / 2, rel=1e-9)
    # enumerate midpoints by hand: row iy*lam + ch*lam/2 -> index 2*iy + ch
    for iy in range(5):
        for ch in range(2):
            np.testing.assert_array_equal(grid.data[:, 2 * iy + ch], data[:, iy, ch])


def test_collapse_86_channel_array_tiles_two_rows(rng):
    chirp = chirp_77ghz(4)
    lam = chirp.wavelength
    layout = linear_mimo_layout(2, 43, lam)
    scan = ApertureScan(3, 2, 2e-3, 86 * lam / 2)
    cube = _cube(np.ones((3, 2, 86, 4)), chirp, scan, layout)
    grid = collapse_virtual_array(cube)
    assert grid.data.shape == (3, 172, 4)


def test_collapse_rejects_overlap():
    chirp = chirp_77ghz(4)
    layout = ArrayLayout([(0, 0)], [(0, 0), (0, 2e-3)])  # midpoints 0 and 1 mm
    scan = ApertureScan(1, 3, 1e-3, 1e-3)                 # rows overlap them
    with pytest.raises(ValueError, match="overlaps"):
        collapse_virtual_array(_cube(np.ones((1, 3, 2, 4)), chirp, scan, layout))


def test_collapse_rejects_nonuniform_grid():
    chirp = chirp_77ghz(4)
    layout = ArrayLayout([(0, 0)], [(0, 0), (0, 0.7e-3)])
    scan = ApertureScan(1, 3, 1e-3, 1e-3)
    with pytest.raises(ValueError, match="phase centre"):
        collapse_virtual_array(_cube(np.ones((1, 3, 2, 4)), chirp, scan, layout))


# ---------------------------------------------------------------- aperture FFT

def _grid(data, dx=2e-3, k=None):
    k = np.linspace(1600, 1690, data.shape[2]) if k is None else k
    return MonostaticGrid(data.astype(np.complex128), k, dx, dx, (0.0, 0.0), 0.0)


def test_aperture_fft_dc():
    spec = aperture_fft(_grid(np.full((6, 5, 3), 2.0 + 1j)))
    mag = np.abs(spec.data)
    assert np.all(mag[0, 0] > 0)
    mag[0, 0] = 0
    assert mag.max() < 1e-12


def test_aperture_fft_parseval(rng):
    data = rng.normal(size=(8, 6, 5)) + 1j * rng.normal(size=(8, 6, 5))
    spec = aperture_fft(_grid(data))
    lhs = np.sum(np.abs(data) ** 2, axis=(0, 1))
    rhs = np.sum(np.abs(spec.data) ** 2, axis=(0, 1)) / (8 * 6)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


def test_aperture_fft_axes_and_padding():
    spec = aperture_fft(_grid(np.ones((8, 4, 2)), dx=1e-3), zero_pad=(2, 3))
    assert spec.data.shape == (16, 12, 2)
    assert spec.stage == PRE_STOLT
    np.testing.assert_allclose(spec.kx_axis, 2 * np.pi * np.fft.fftfreq(16, 1e-3))
    assert spec.kx_axis.min() < 0


def test_point_target_spectrum_flat_in_propagating_region():
    chirp = chirp_77ghz(4)
    scan = centered_scan(160, 160, 1e-3)
    cube = simulate_beat(Scene([PointScatterer((0, 0, 0.1))]), chirp, scan, single_transceiver())
    grid = collapse_virtual_array(cube)
    # taper only the outer rim so truncation ripple does not reach the centre
    pos = scan.positions()
    r = np.hypot(pos[..., 0], pos[..., 1])
    rim = np.clip((r - 0.04) / 0.038, 0.0, 1.0)
    taper = 0.5 * (1 + np.cos(np.pi * rim))
    spec = aperture_fft(MonostaticGrid(grid.data * taper[:, :, None], grid.k, grid.dx,
                                       grid.dy, grid.origin, grid.z_plane))
    kx, ky = np.meshgrid(spec.kx_axis, spec.ky_axis, indexing="ij")
    for q, k in enumerate(grid.k):
        # spatial frequencies seen within 20 degrees of broadside
        inner = np.hypot(kx, ky) <= 2 * k * math.sin(math.radians(20))
        mag = np.abs(spec.data[:, :, q])[inner]
        assert mag.size > 1000
        assert mag.min() >= 0.9 * np.median(mag)
        assert mag.max() <= 1.1 * np.median(mag)


# ---------------------------------------------------------------- dispersion

def test_dispersion_examples():
    assert dispersion_kz(0.0, 0.0, K0) == pytest.approx(2 * K0)
    assert dispersion_kz(2 * K0, 0.0, K0) == 0.0
    kx = math.sqrt(5) * K0 / math.sqrt(2)
    assert math.isnan(dispersion_kz(kx, kx, K0))


@given(st.floats(-4000, 4000), st.floats(-4000, 4000), st.floats(1.0, 3000.0))
def test_dispersion_exact_and_nonnegative(kx, ky, k):
    kz = dispersion_kz(kx, ky, k)
    if 4 * k * k >= kx * kx + ky * ky:
        assert kz >= 0
        assert kx * kx + ky * ky + kz * kz == pytest.approx(4 * k * k, rel=1e-10, abs=1e-9)
    else:
        assert math.isnan(kz)


# ---------------------------------------------------------------- Stolt

def _pre_spec(data, dx=2e-3, k=None):
    return aperture_fft(_grid(np.fft.ifft2(data, axes=(0, 1)), dx=dx, k=k))


def test_stolt_constant_along_k():
    k = np.linspace(1600, 1690, 30)
    data = np.ones((8, 8, 30), dtype=complex) * (2 - 1j)
    spec = _pre_spec(data, k=k)
    out = stolt_resample(spec, 64)
    assert out.stage == POST_STOLT
    kz = out.third_axis
    for i in range(8):
        for j in range(8):
            src = dispersion_kz(spec.kx_axis[i], spec.ky_axis[j], k)
            src = src[~np.isnan(src)]
            inside = (kz >= src[0]) & (kz <= src[-1])
            np.testing.assert_allclose(out.data[i, j, inside], 2 - 1j, rtol=1e-12)
            assert not out.data[i, j, ~inside].any()


def test_stolt_node_query_returns_source_value(rng):
    # a single on-axis bin: kx = ky = 0 so source nodes are exactly 2k
    k = np.linspace(1600, 1690, 10)
    pre = KSpaceSpectrum(rng.normal(size=(1, 1, 10)) + 1j * rng.normal(size=(1, 1, 10)),
                         np.zeros(1), np.zeros(1), k, PRE_STOLT, 1e-3, 1e-3, (0, 0), 0.0)
    # grid 2*k[0] .. 2*k[-1] in 9 steps lands on every node
    out = stolt_resample(pre, 10)
    np.testing.assert_allclose(out.third_axis, 2 * k, rtol=1e-15)
    np.testing.assert_allclose(out.data[0, 0], pre.data[0, 0], rtol=1e-12)


def _fine_grid_oracle(kx, ky, k, values, kz_targets, factor=10):
    """Scalar re-implementation: densify each segment 10x, then read targets."""
    nodes = []
    for kk, v in zip(k, values):
        arg = 4 * kk * kk - kx * kx - ky * ky
        if arg >= 0:
            nodes.append((math.sqrt(arg), v))
    out = [0j] * len(kz_targets)
    if len(nodes) < 2:
        return out
    fine_z, fine_v = [], []
    for (z0, v0), (z1, v1) in zip(nodes[:-1], nodes[1:]):
        for s in range(factor):
            t = s / factor
            fine_z.append(z0 + t * (z1 - z0))
            fine_v.append(v0 + t * (v1 - v0))
    fine_z.append(nodes[-1][0])
    fine_v.append(nodes[-1][1])
    for q, z in enumerate(kz_targets):
        if z < fine_z[0] or z > fine_z[-1]:
            continue
        j = min(bisect.bisect_right(fine_z, z), len(fine_z) - 1)
        za, zb = fine_z[j - 1], fine_z[j]
        w = 0.0 if zb == za else (z - za) / (zb - za)
        out[q] = fine_v[j - 1] + w * (fine_v[j] - fine_v[j - 1])
    return out


def test_stolt_matches_fine_grid_oracle(rng):
    k = wavenumber_axis(chirp_77ghz(64))
    nkx, nky = 6, 5
    # smooth random spectrum: a few low-order complex harmonics in k per bin
    t = (k - k[0]) / (k[-1] - k[0])
    coef = rng.normal(size=(nkx, nky, 3)) + 1j * rng.normal(size=(nkx, nky, 3))
    data = (coef[..., :1] + coef[..., 1:2] * np.cos(np.pi * t) + coef[..., 2:] * t ** 2)
    spec = KSpaceSpectrum(data, 2 * np.pi * np.fft.fftfreq(nkx, 2e-3),
                          2 * np.pi * np.fft.fftfreq(nky, 2e-3), k, PRE_STOLT,
                          2e-3, 2e-3, (0, 0), 0.0)
    out = stolt_resample(spec, 257)
    for i in range(nkx):
        for j in range(nky):
            ref = np.array(_fine_grid_oracle(spec.kx_axis[i], spec.ky_axis[j], k,
                                             data[i, j], out.third_axis))
            inside = ref != 0
            err = np.abs(out.data[i, j, inside] - ref[inside]).max()
            assert err <= 1e-3 * np.abs(ref[inside]).max()
            assert not out.data[i, j, ~inside].any()


def test_stolt_grid_bounds():
    k = np.linspace(1600, 1690, 16)
    kx = 2 * np.pi * np.fft.fftfreq(8, 2e-3)
    lo, hi = kz_grid_bounds(kx, kx, k)
    assert lo == pytest.approx(math.sqrt(4 * 1600 ** 2 - 2 * (np.pi / 2e-3) ** 2))
    assert hi == 2 * 1690
    # fine pitch: all of kx/ky reach beyond 2k, so the grid starts at 0
    kx = 2 * np.pi * np.fft.fftfreq(8, 0.5e-3)
    assert kz_grid_bounds(kx, kx, k)[0] == 0.0


def test_stolt_evanescent_purge(rng):
    k = np.linspace(1600, 1690, 32)
    data = rng.normal(size=(16, 16, 32)) + 1j * rng.normal(size=(16, 16, 32))
    spec = _pre_spec(data, dx=0.6e-3, k=k)
    out = stolt_resample(spec, 100)
    kx, ky = np.meshgrid(spec.kx_axis, spec.ky_axis, indexing="ij")
    dead = kx ** 2 + ky ** 2 > 4 * k[-1] ** 2
    assert dead.any()
    assert not out.data[dead].any()


def test_stolt_energy_does_not_grow(point_cube_32):
    grid = collapse_virtual_array(point_cube_32)
    spec = aperture_fft(grid)
    pre = np.sum(np.abs(spec.data) ** 2)
    for nz in (64, 128, 256):
        post = np.sum(np.abs(stolt_resample(spec, nz).data) ** 2)
        assert post <= pre * (1 + 1e-6)


def test_stolt_warns_when_range_too_short():
    k = np.linspace(1600, 1690, 16)
    spec = _pre_spec(np.ones((4, 4, 16), dtype=complex), k=k)
    out = stolt_resample(spec, 8, z_extent=10.0)
    assert out.meta["warnings"]
    assert not stolt_resample(spec, 8).meta["warnings"]


def test_stolt_rejects_bad_inputs():
    spec = _pre_spec(np.ones((4, 4, 16), dtype=complex))
    with pytest.raises(ValueError):
        stolt_resample(spec, 1)
    with pytest.raises(ValueError):
        stolt_resample(stolt_resample(spec, 8), 8)


# ---------------------------------------------------------------- reference phase, 3D IFFT

def _post(rng, shape=(4, 5, 6), kz0=2000.0):
    data = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    data[0, 0, :2] = 0
    kz = kz0 + 3.0 * np.arange(shape[2])
    return KSpaceSpectrum(data, np.zeros(shape[0]), np.zeros(shape[1]), kz, POST_STOLT,
                          1e-3, 1e-3, (0.0, 0.0), 0.0)


def test_reference_phase_properties(rng):
    spec = _post(rng)
    same = apply_reference_phase(spec, 0.0)
    np.testing.assert_array_equal(same.data, spec.data)
    moved = apply_reference_phase(spec, 0.37)
    np.testing.assert_allclose(np.abs(moved.data), np.abs(spec.data), rtol=1e-15)
    assert not moved.data[0, 0, :2].any()
    back = apply_reference_phase(moved, -0.37)
    np.testing.assert_allclose(back.data, spec.data, rtol=1e-12)
    assert moved.z_ref == -0.37


def test_ifft_round_trip_impulse():
    vol = np.zeros((6, 5, 8), dtype=complex)
    vol[2, 3, 5] = 1.0
    image = ImageVolume(vol, (1e-3, 2e-3, 3e-3), (0.0, 0.0, 0.1))
    for kz0 in (0.0, 2345.6):
        back = inverse_fft_3d(forward_fft_3d(image, kz0))
        np.testing.assert_allclose(back.data, vol, atol=1e-10)
        assert back.spacing == pytest.approx(image.spacing)
        assert back.origin == pytest.approx(image.origin)


def test_ifft_zero_spectrum(rng):
    spec = _post(rng)
    spec.data[...] = 0
    assert not inverse_fft_3d(spec).data.any()


def test_ifft_single_bin_is_plane_wave_along_z():
    nx, ny, nz = 4, 4, 32
    dkz = 10.0
    kz = 2000.0 + dkz * np.arange(nz)
    data = np.zeros((nx, ny, nz), dtype=complex)
    q = 5
    data[0, 0, q] = 1.0
    spec = KSpaceSpectrum(data, np.zeros(nx), np.zeros(ny), kz, POST_STOLT,
                          1e-3, 1e-3, (0, 0), 0.0)
    vol = inverse_fft_3d(spec)
    dz = 2 * np.pi / (nz * dkz)
    assert vol.spacing[2] == pytest.approx(dz)
    z = dz * np.arange(nz)
    # analytic inverse DFT of one bin at physical wavenumber kappa
    kappa = kz[q]
    expected = np.exp(1j * kappa * z) / (nx * ny * nz)
    for i in range(nx):
        for j in range(ny):
            np.testing.assert_allclose(vol.data[i, j], expected, rtol=1e-10)
    # real part is a sinusoid with period 2*pi/kappa
    np.testing.assert_allclose(vol.data[0, 0].real * nx * ny * nz, np.cos(kappa * z), atol=1e-10)


# ---------------------------------------------------------------- full pipeline

def test_reconstruct_point_target_peak(chirp256):
    scan = centered_scan(32, 32, 2e-3)
    target = (0.0, 0.0, 0.5)
    cube = simulate_beat(Scene([PointScatterer(target)]), chirp256, scan, single_transceiver())
    vol = reconstruct(cube, nz=128)
    assert vol.spacing[:2] == pytest.approx((2e-3, 2e-3))
    truth = np.array(vol.index_of(target))
    assert np.abs(np.array(peak_index(vol.data)) - truth).max() <= 1
    assert vol.meta["nz"] == 128 and vol.meta["z0"] == 0.0


def test_reconstruct_shift_by_four_voxels(chirp256):
    scan = centered_scan(32, 32, 2e-3)
    peaks = []
    for x in (0.0, 4 * 2e-3):
        cube = simulate_beat(Scene([PointScatterer((x, 0.0, 0.5))]), chirp256, scan,
                             single_transceiver())
        peaks.append(np.array(peak_index(reconstruct(cube, nz=128, window="hann").data)))
    np.testing.assert_array_equal(peaks[1] - peaks[0], [4, 0, 0])


def test_unwindowed_shift_within_one_voxel(chirp256):
    # without a taper the flat-topped lateral lobe picks up wrap ripple from
    # the periodic aperture, so argmax may move by one voxel
    scan = centered_scan(32, 32, 2e-3)
    for x in (0.0, 4 * 2e-3, -3 * 2e-3):
        target = (x, 0.0, 0.5)
        cube = simulate_beat(Scene([PointScatterer(target)]), chirp256, scan,
                             single_transceiver())
        vol = reconstruct(cube, nz=128)
        assert np.abs(np.array(peak_index(vol.data)) - vol.index_of(target)).max() <= 1


@pytest.mark.parametrize("axis, steps", [(0, -3), (1, 5), (1, -6)])
def test_reconstruct_shift_covariance(chirp64, axis, steps):
    scan = centered_scan(32, 32, 2e-3)
    base = np.array([0.0, 0.0, 0.3])
    peaks = []
    for shift in (0, steps):
        pos = base.copy()
        pos[axis] += shift * 2e-3
        cube = simulate_beat(Scene([PointScatterer(pos)]), chirp64, scan, single_transceiver())
        peaks.append(np.array(peak_index(reconstruct(cube, nz=64, window="hann").data)))
    expected = np.zeros(3, dtype=int)
    expected[axis] = steps
    np.testing.assert_array_equal(peaks[1] - peaks[0], expected)


def test_reconstruct_with_nonzero_aperture_plane(chirp64):
    scan = centered_scan(32, 32, 2e-3, z_plane=0.1)
    target = (0.0, 0.0, 0.45)
    cube = simulate_beat(Scene([PointScatterer(target)]), chirp64, scan, single_transceiver())
    vol = reconstruct(cube, nz=96)
    # default reference plane: absolute z coordinates
    assert vol.origin[2] == 0.0
    assert abs(vol.z[peak_index(vol.data)[2]] - 0.45) <= vol.spacing[2]
    # reference at 0: the window starts at the aperture plane instead
    rel = reconstruct(cube, nz=96, z0=0.0)
    assert rel.origin[2] == pytest.approx(0.1)
    assert abs(rel.z[peak_index(rel.data)[2]] - 0.45) <= rel.spacing[2]


def test_reconstruct_mimo_cube(chirp64):
    lam = chirp64.wavelength
    layout = linear_mimo_layout(2, 4, lam)  # 8 channels at lam/2
    scan = ApertureScan(24, 3, lam / 2, 8 * lam / 2, (-12 * lam / 2, -12 * lam / 2))
    target = (0.0, 0.0, 0.25)
    cube = simulate_beat(Scene([PointScatterer(target)]), chirp64, scan, layout)
    vol = reconstruct(cube, nz=64, window="hann", zero_pad=2)
    assert vol.shape[:2] == (48, 48)
    assert np.abs(np.array(peak_index(vol.data)) - vol.index_of(target)).max() <= 1


def test_reconstruct_is_deterministic(point_cube_32):
    a = reconstruct(point_cube_32, nz=64)
    b = reconstruct(point_cube_32, nz=64)
    assert a.data.tobytes() == b.data.tobytes()


def test_window_validation(point_cube_32):
    with pytest.raises(ValueError, match="window"):
        reconstruct(point_cube_32, nz=16, window="kaiser")
    with pytest.raises(ValueError, match="zero_pad"):
        reconstruct(point_cube_32, nz=16, zero_pad=0)
