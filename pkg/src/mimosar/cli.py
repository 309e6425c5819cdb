"""Command-line entry point: ``mimosar <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import analysis, backprojection, formats, rma
from .config import load_config
from .scene import add_noise, simulate_beat

MM = 1e-3


class UsageError(Exception):
    pass


def _parse_z_mm(spec: str) -> list[float]:
    """'410,490' or 'start:stop:step' in mm -> list of metres."""
    try:
        if ":" in spec:
            start, stop, step = (float(v) for v in spec.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [(start + i * step) * MM for i in range(n)]
        return [float(v) * MM for v in spec.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse --z {spec!r}; use 'z1,z2,...' or 'start:stop:step' in mm")


def _zero_pad(spec: str) -> tuple[int, int]:
    try:
        vals = [int(v) for v in spec.split(",")]
    except ValueError:
        raise UsageError(f"--zero-pad expects integers, got {spec!r}")
    if len(vals) not in (1, 2):
        raise UsageError("--zero-pad takes one or two factors")
    return vals[0], vals[-1]


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    cube = simulate_beat(cfg.scene, cfg.chirp, cfg.scan, cfg.layout)
    snr = cfg.noise.snr_db if args.snr_db is None else args.snr_db
    seed = cfg.noise.seed if args.seed is None else args.seed
    cube = add_noise(cube, snr, seed)
    formats.save_beat_cube(cube, args.out)
    print(f"wrote {args.out}: {cube.data.shape} samples, {len(cfg.scene)} scatterers")
    return 0


def cmd_reconstruct(args) -> int:
    cube = formats.load_beat_cube(args.inp)
    params = load_config(args.config).recon if args.config else None
    nz = params.nz if params else None
    if args.nz is not None:
        nz = None if args.nz == "auto" else int(args.nz)
    zero_pad = params.zero_pad if params else (1, 1)
    if args.zero_pad is not None:
        zero_pad = _zero_pad(args.zero_pad)
    window = args.window or (params.window if params else "none")
    z0 = params.z0 if params else None
    vol = rma.reconstruct(cube, nz=nz, zero_pad=zero_pad, window=window, z0=z0)
    formats.save_volume(vol, args.out)
    with open(args.out + ".json", "w") as fh:
        json.dump(vol.meta, fh, indent=2, sort_keys=True)
    print(f"wrote {args.out}: volume {vol.shape}, spacing {vol.spacing}")
    return 0


def cmd_backproject(args) -> int:
    if not args.z:
        raise UsageError("backproject needs --z to define the image planes")
    zs = np.array(_parse_z_mm(args.z))
    if zs.size == 0:
        raise UsageError("--z gave no planes")
    dz = float(np.diff(zs).mean()) if zs.size > 1 else 1e-3
    if zs.size > 1 and not np.allclose(np.diff(zs), dz, rtol=0, atol=1e-9):
        raise UsageError("--z planes must be evenly spaced")
    cube = formats.load_beat_cube(args.inp)
    grid = rma.collapse_virtual_array(cube)
    vg = backprojection.VoxelGrid((grid.data.shape[0], grid.data.shape[1], zs.size),
                                  (grid.dx, grid.dy, dz), (grid.origin[0], grid.origin[1], zs[0]))
    vol = backprojection.backproject(cube, vg)
    formats.save_volume(vol, args.out)
    print(f"wrote {args.out}: volume {vol.shape}")
    return 0


def cmd_analyze(args) -> int:
    vol = formats.load_volume(args.inp)
    sys.stdout.write(analysis.psf_metrics(vol).to_text())
    return 0


def cmd_slices(args) -> int:
    if not args.z:
        raise UsageError("slices needs --z")
    zs = _parse_z_mm(args.z)
    vol = formats.load_volume(args.inp)
    paths = formats.export_slices(vol, zs, args.floor_db, args.out)
    for p in paths:
        print(p)
    return 0


def cmd_resolution(args) -> int:
    cfg = load_config(args.config)
    if args.z:
        range_z = _parse_z_mm(args.z)[0] - cfg.scan.z_plane
    elif len(cfg.scene):
        range_z = cfg.scene.scatterers[0].position[2] - cfg.scan.z_plane
    else:
        raise UsageError("resolution needs --z when the config has no scene")
    res = analysis.theoretical_resolution(cfg.chirp, cfg.scan, range_z)

    def mm(v):
        return "undefined" if v is None else f"{v / MM:.4f}"

    print(f"range_mm: {range_z / MM:.4f}")
    print(f"bandwidth_hz: {cfg.chirp.bandwidth:.6g}")
    print(f"dz_mm: {mm(res.dz)}")
    print(f"dx_mm: {mm(res.dx)}")
    print(f"dy_mm: {mm(res.dy)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimosar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="config -> beat-cube file")
    p.add_argument("--config", required=True, help="config path or 'example'")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--snr-db", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="beat cube -> volume (omega-k)")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="take [recon] defaults from this config")
    p.add_argument("--nz", help="kz samples, or 'auto'")
    p.add_argument("--zero-pad", help="aperture zero-pad factor(s), e.g. 2 or 2,4")
    p.add_argument("--window", choices=rma.WINDOWS)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("backproject", help="beat cube -> volume (exact backprojection)")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--z", help="z planes in mm: 'start:stop:step' or evenly spaced list")
    p.set_defaults(func=cmd_backproject)

    p = sub.add_parser("analyze", help="volume -> PSF report")
    p.add_argument("--in", dest="inp", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("slices", help="volume -> graymap range cuts")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--z", help="cut depths in mm")
    p.add_argument("--floor-db", type=float, default=-40.0)
    p.set_defaults(func=cmd_slices)

    p = sub.add_parser("resolution", help="config -> theoretical resolution")
    p.add_argument("--config", required=True)
    p.add_argument("--z", help="range in mm (default: first scatterer)")
    p.set_defaults(func=cmd_resolution)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mimosar {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"mimosar {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
