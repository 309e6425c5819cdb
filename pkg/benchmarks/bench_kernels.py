"""Time the numba and numpy kernel paths on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each kernel is called once untimed so numba compilation (or the on-disk
cache load) is excluded, then the best of ``--repeat`` runs is reported.
"""
import argparse
import time

import numpy as np

from mimosar import _kernels
from mimosar.geometry import centered_scan, element_positions, chirp_77ghz, single_transceiver, wavenumber_axis


def _best(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    chirp = chirp_77ghz(256)
    k = wavenumber_axis(chirp)
    tx, rx = element_positions(centered_scan(32, 32, 2e-3), single_transceiver())
    targets = rng.uniform([-0.02, -0.02, 0.3], [0.02, 0.02, 0.6], (4, 3))
    refl = np.ones(4, dtype=np.complex128)
    yield "beat (1024 pos x 256 k x 4 targets)", lambda b: lambda: b(tx, rx, targets, refl, k, False)

    data = rng.normal(size=(tx.shape[0], 64)) + 1j * rng.normal(size=(tx.shape[0], 64))
    vox = rng.uniform([-0.02, -0.02, 0.3], [0.02, 0.02, 0.6], (2000, 3))
    k64 = k[::4].copy()
    yield "backproject (2000 vox x 1024 pos x 64 k)", lambda b: lambda: b(vox, tx, rx, k64, data)

    kx = 2 * np.pi * np.fft.fftfreq(64, 2e-3)
    spec = rng.normal(size=(64, 64, 256)) + 1j * rng.normal(size=(64, 64, 256))
    kz = np.linspace(2300.0, 2 * k[-1], 256)
    yield "stolt (64 x 64 bins, 256 -> 256)", lambda b: lambda: b(spec, kx, kx, k, kz)


KERNELS = {
    "beat": (_kernels.beat_numpy, getattr(_kernels, "beat_numba", None)),
    "backproject": (_kernels.backproject_numpy,
                    _kernels.backproject_fast_numba if _kernels.HAVE_NUMBA else None),
    "stolt": (_kernels.stolt_numpy, getattr(_kernels, "stolt_numba", None)),
}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':45s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}")
    for (label, make), (np_fn, nb_fn) in zip(cases(rng), KERNELS.values()):
        t_np = _best(make(np_fn), args.repeat)
        if nb_fn is None or not _kernels.HAVE_NUMBA:
            print(f"{label:45s} {t_np:10.4f} {'n/a':>10s} {'':>8s}")
            continue
        t_nb = _best(make(nb_fn), args.repeat)
        print(f"{label:45s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
