"""Hot loops: beat synthesis, backprojection and Stolt resampling.

Each kernel exists twice, a numba ``@njit`` version and a pure-numpy version
with the same summation order. The dispatch names (``beat``, ``backproject``,
``stolt``) point at the numba versions unless numba is missing or the
environment variable ``MIMOSAR_DISABLE_NUMBA`` is set to a non-empty value
other than ``0``. Both versions stay importable so they can be compared.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import config as _numba_config, njit, prange
    # the bundled TBB is too old on some hosts; skip it instead of warning
    _numba_config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

_flag = os.environ.get("MIMOSAR_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag in ("", "0", "false", "no")

# voxel block size for the numpy backprojector (bounds the temporary array)
_BP_BLOCK = 4096


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# beat signal: out[m, n] = sum_t p_t * exp(+j k_n (|tx_m - x_t| + |rx_m - x_t|)) [* w]
# ---------------------------------------------------------------------------

def beat_numpy(tx, rx, targets, refl, k, spreading=False):
    out = np.zeros((tx.shape[0], k.shape[0]), dtype=np.complex128)
    for t in range(targets.shape[0]):
        rt = np.sqrt(((tx - targets[t]) ** 2).sum(axis=1))
        rr = np.sqrt(((rx - targets[t]) ** 2).sum(axis=1))
        amp = refl[t] / (rt * rr) if spreading else np.full(rt.shape, refl[t])
        out += amp[:, None] * np.exp(1j * (k[None, :] * (rt + rr)[:, None]))
    return out


# ---------------------------------------------------------------------------
# backprojection: out[v] = sum_m sum_n data[m, n] * exp(-j k_n (|v - tx_m| + |v - rx_m|))
# ---------------------------------------------------------------------------

def backproject_numpy(voxels, tx, rx, k, data):
    out = np.zeros(voxels.shape[0], dtype=np.complex128)
    for start in range(0, voxels.shape[0], _BP_BLOCK):
        vox = voxels[start:start + _BP_BLOCK]
        acc = np.zeros(vox.shape[0], dtype=np.complex128)
        for m in range(tx.shape[0]):
            r = (np.sqrt(((vox - tx[m]) ** 2).sum(axis=1))
                 + np.sqrt(((vox - rx[m]) ** 2).sum(axis=1)))
            acc += np.exp(-1j * (r[:, None] * k[None, :])) @ data[m]
        out[start:start + _BP_BLOCK] = acc
    return out


# ---------------------------------------------------------------------------
# Stolt: per (kx, ky) bin, linear interpolation in kz from the nonuniform
# nodes sqrt(4k^2 - kx^2 - ky^2) onto a shared uniform kz grid.
# ---------------------------------------------------------------------------

def stolt_numpy(data, kx, ky, k, kz_grid):
    nkx, nky, _ = data.shape
    out = np.zeros((nkx, nky, kz_grid.shape[0]), dtype=np.complex128)
    four_k2 = 4.0 * k ** 2
    for i in range(nkx):
        for j in range(nky):
            arg = four_k2 - (kx[i] ** 2 + ky[j] ** 2)
            prop = arg >= 0.0
            if not prop.any():
                continue
            # kz is increasing in k, so the propagating nodes are a suffix
            kz_src = np.sqrt(arg[prop])
            out[i, j] = np.interp(kz_grid, kz_src, data[i, j, prop], left=0.0, right=0.0)
    return out


if HAVE_NUMBA:
    _opts = dict(cache=True, fastmath=False)

    @njit(parallel=True, **_opts)
    def beat_numba(tx, rx, targets, refl, k, spreading=False):
        nm = tx.shape[0]
        nk = k.shape[0]
        out = np.zeros((nm, nk), dtype=np.complex128)
        for m in prange(nm):
            for t in range(targets.shape[0]):
                rt = np.sqrt((tx[m, 0] - targets[t, 0]) ** 2 + (tx[m, 1] - targets[t, 1]) ** 2
                             + (tx[m, 2] - targets[t, 2]) ** 2)
                rr = np.sqrt((rx[m, 0] - targets[t, 0]) ** 2 + (rx[m, 1] - targets[t, 1]) ** 2
                             + (rx[m, 2] - targets[t, 2]) ** 2)
                amp = refl[t] / (rt * rr) if spreading else refl[t]
                r = rt + rr
                for n in range(nk):
                    ph = k[n] * r
                    out[m, n] += amp * (np.cos(ph) + 1j * np.sin(ph))
        return out

    @njit(parallel=True, **_opts)
    def backproject_numba(voxels, tx, rx, k, data):
        nv = voxels.shape[0]
        out = np.zeros(nv, dtype=np.complex128)
        for v in prange(nv):
            x = voxels[v, 0]
            y = voxels[v, 1]
            z = voxels[v, 2]
            acc = 0.0 + 0.0j
            for m in range(tx.shape[0]):
                r = (np.sqrt((x - tx[m, 0]) ** 2 + (y - tx[m, 1]) ** 2 + (z - tx[m, 2]) ** 2)
                     + np.sqrt((x - rx[m, 0]) ** 2 + (y - rx[m, 1]) ** 2 + (z - rx[m, 2]) ** 2))
                re = 0.0
                im = 0.0
                for n in range(k.shape[0]):
                    # data * (cos - j sin), written out to avoid complex exp
                    ph = r * k[n]
                    c = np.cos(ph)
                    s = np.sin(ph)
                    d = data[m, n]
                    re += d.real * c + d.imag * s
                    im += d.imag * c - d.real * s
                acc += re + 1j * im
            out[v] = acc
        return out

    @njit(parallel=True, **_opts)
    def backproject_uniform_numba(voxels, tx, rx, k0, dk, nk, data):
        """Backprojection for k_n = k0 + n*dk via a phasor recurrence.

        One complex multiply per sample instead of a sin/cos pair; the
        rounding drift over a few thousand steps stays near 1e-13.
        """
        nv = voxels.shape[0]
        out = np.zeros(nv, dtype=np.complex128)
        for v in prange(nv):
            x = voxels[v, 0]
            y = voxels[v, 1]
            z = voxels[v, 2]
            acc = 0.0 + 0.0j
            for m in range(tx.shape[0]):
                r = (np.sqrt((x - tx[m, 0]) ** 2 + (y - tx[m, 1]) ** 2 + (z - tx[m, 2]) ** 2)
                     + np.sqrt((x - rx[m, 0]) ** 2 + (y - rx[m, 1]) ** 2 + (z - rx[m, 2]) ** 2))
                ph = np.exp(-1j * (r * k0))
                step = np.exp(-1j * (r * dk))
                part = 0.0 + 0.0j
                for n in range(nk):
                    part += data[m, n] * ph
                    ph *= step
                acc += part
            out[v] = acc
        return out

    @njit(parallel=True, **_opts)
    def stolt_numba(data, kx, ky, k, kz_grid):
        nkx, nky, nk = data.shape
        nz = kz_grid.shape[0]
        out = np.zeros((nkx, nky, nz), dtype=np.complex128)
        for i in prange(nkx):
            kz_src = np.empty(nk)
            for j in range(nky):
                lat2 = kx[i] ** 2 + ky[j] ** 2
                first = nk
                for n in range(nk):
                    arg = 4.0 * k[n] ** 2 - lat2
                    if arg >= 0.0:
                        kz_src[n] = np.sqrt(arg)
                        if first == nk:
                            first = n
                    else:
                        kz_src[n] = 0.0
                if first == nk:
                    continue
                lo = first
                for q in range(nz):
                    kz = kz_grid[q]
                    if kz < kz_src[first] or kz > kz_src[nk - 1]:
                        continue
                    while lo < nk - 2 and kz > kz_src[lo + 1]:
                        lo += 1
                    if first == nk - 1:
                        out[i, j, q] = data[i, j, nk - 1]
                        continue
                    w = (kz - kz_src[lo]) / (kz_src[lo + 1] - kz_src[lo])
                    if w == 0.0:
                        out[i, j, q] = data[i, j, lo]
                    else:
                        out[i, j, q] = (1.0 - w) * data[i, j, lo] + w * data[i, j, lo + 1]
        return out
else:  # pragma: no cover
    beat_numba = backproject_numba = backproject_uniform_numba = stolt_numba = None


def uniform_step(k: np.ndarray) -> float | None:
    """Spacing of an evenly spaced axis, or None if it is not evenly spaced."""
    if k.shape[0] < 2:
        return None
    dk = (k[-1] - k[0]) / (k.shape[0] - 1)
    expected = k[0] + dk * np.arange(k.shape[0])
    if np.abs(k - expected).max() > 1e-12 * np.abs(k).max():
        return None
    return float(dk)


def backproject_fast_numba(voxels, tx, rx, k, data):
    dk = uniform_step(k)
    if dk is None:
        return backproject_numba(voxels, tx, rx, k, data)
    return backproject_uniform_numba(voxels, tx, rx, float(k[0]), dk, k.shape[0], data)


if USE_NUMBA:
    beat = beat_numba
    backproject = backproject_fast_numba
    stolt = stolt_numba
else:
    beat = beat_numpy
    backproject = backproject_numpy
    stolt = stolt_numpy
