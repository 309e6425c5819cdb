"""Run configuration: a small sectioned ``key = value`` text format.

::

    # comments start with '#'
    [chirp]
    f0_hz = 77e9
    slope_hz_per_us = 70.295e6
    t_chirp_us = 56
    n_samples = 256
    f_sample_hz = 5121492.857142857
    # c_m_per_s = 299792458            (optional)

    [array]
    mode = monostatic                  # or bistatic
    tx_mm = 0, 0                       # pairs separated by ';'
    rx_mm = 0, 0

    [scan]
    nx = 32
    ny = 32
    dx_mm = 2
    dy_mm = 2
    origin_mm = -32, -32               # optional, default 0, 0
    z_plane_mm = 0                     # optional

    [scene]                            # optional; one line per scatterer
    target = 0, 0, 540, 1, 0           # x_mm, y_mm, z_mm, re[, im]

    [recon]                            # optional
    nz = auto
    zero_pad = 1                       # or "px, py"
    window = none                      # none | hann | hamming
    z0_mm = 0                          # default: z_plane_mm

    [noise]                            # optional
    snr_db = inf
    seed = 0

Lengths given in mm are converted to metres by multiplying by 1e-3.
Scene keys are free labels; every other key must be one of the above.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources

from .geometry import BISTATIC, MONOSTATIC, SPEED_OF_LIGHT, ApertureScan, ArrayLayout, ChirpConfig
from .rma import WINDOWS
from .scene import PointScatterer, Scene

MM = 1e-3
EXAMPLE_NAME = "example"

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.-]*$")
_REQUIRED = {
    "chirp": ("f0_hz", "slope_hz_per_us", "t_chirp_us", "n_samples", "f_sample_hz"),
    "array": ("mode", "tx_mm", "rx_mm"),
    "scan": ("nx", "ny", "dx_mm", "dy_mm"),
}
_OPTIONAL = {
    "chirp": ("c_m_per_s",),
    "array": (),
    "scan": ("origin_mm", "z_plane_mm"),
    "recon": ("nz", "zero_pad", "window", "z0_mm"),
    "noise": ("snr_db", "seed"),
}
_MODE_NAMES = {"monostatic": MONOSTATIC, MONOSTATIC: MONOSTATIC, BISTATIC: BISTATIC}


class ConfigError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class ReconParams:
    nz: int | None = None
    zero_pad: tuple[int, int] = (1, 1)
    window: str = "none"
    z0: float | None = None


@dataclass(frozen=True)
class NoiseParams:
    snr_db: float = math.inf
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    chirp: ChirpConfig
    layout: ArrayLayout
    scan: ApertureScan
    scene: Scene = Scene()
    recon: ReconParams = ReconParams()
    noise: NoiseParams = NoiseParams()


@dataclass
class _Entry:
    value: str
    line: int


@dataclass
class _Section:
    line: int
    entries: dict[str, _Entry] = field(default_factory=dict)


def _tokenize(text: str) -> dict[str, _Section]:
    sections: dict[str, _Section] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            name = m.group(1).lower()
            if name not in _REQUIRED and name not in _OPTIONAL and name != "scene":
                raise ConfigError(lineno, f"unknown section [{name}]")
            if name in sections:
                raise ConfigError(lineno, f"duplicate section [{name}]")
            current = sections[name] = _Section(lineno)
            continue
        if "=" not in line:
            raise ConfigError(lineno, f"expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(lineno, "key outside of any section")
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigError(lineno, f"invalid key {key!r}")
        if key in current.entries:
            raise ConfigError(lineno, f"duplicate key {key!r} (first set on line "
                                      f"{current.entries[key].line})")
        current.entries[key] = _Entry(value, lineno)
    return sections


def _number(entry: _Entry, key: str) -> float:
    try:
        return float(entry.value)
    except ValueError:
        raise ConfigError(entry.line, f"{key}: expected a number, got {entry.value!r}") from None


def _integer(entry: _Entry, key: str) -> int:
    try:
        return int(entry.value)
    except ValueError:
        raise ConfigError(entry.line, f"{key}: expected an integer, got {entry.value!r}") from None


def _numbers(entry: _Entry, key: str, count: int | tuple[int, ...]) -> list[float]:
    parts = [p.strip() for p in entry.value.split(",")]
    counts = (count,) if isinstance(count, int) else count
    if len(parts) not in counts:
        raise ConfigError(entry.line, f"{key}: expected {' or '.join(map(str, counts))} "
                                      f"comma-separated numbers, got {entry.value!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(entry.line, f"{key}: non-numeric value in {entry.value!r}") from None


def _pairs_mm(entry: _Entry, key: str) -> list[tuple[float, float]]:
    pairs = []
    for chunk in entry.value.split(";"):
        if chunk.strip():
            x, y = _numbers(_Entry(chunk, entry.line), key, 2)
            pairs.append((x * MM, y * MM))
    if not pairs:
        raise ConfigError(entry.line, f"{key}: at least one offset pair required")
    return pairs


def _positive(entry: _Entry, key: str, value: float) -> float:
    if not (value > 0 and math.isfinite(value)):
        raise ConfigError(entry.line, f"{key}: must be positive, got {entry.value!r}")
    return value


def _check_keys(sections: dict[str, _Section], text_lines: int):
    for name, sec in sections.items():
        if name == "scene":
            continue
        allowed = _REQUIRED.get(name, ()) + _OPTIONAL.get(name, ())
        for key, entry in sec.entries.items():
            if key not in allowed:
                raise ConfigError(entry.line, f"unknown key {key!r} in [{name}]")
    for name, keys in _REQUIRED.items():
        if name not in sections:
            raise ConfigError(text_lines, f"missing required section [{name}]")
        for key in keys:
            if key not in sections[name].entries:
                raise ConfigError(sections[name].line, f"missing required key {key!r} in [{name}]")


def parse_config(text: bytes | str) -> RunConfig:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(1, f"config is not UTF-8: {exc}") from None
    sections = _tokenize(text)
    _check_keys(sections, max(1, len(text.splitlines())))

    c = sections["chirp"]
    e = c.entries
    f0 = _positive(e["f0_hz"], "f0_hz", _number(e["f0_hz"], "f0_hz"))
    slope = _positive(e["slope_hz_per_us"], "slope_hz_per_us",
                      _number(e["slope_hz_per_us"], "slope_hz_per_us")) * 1e6
    t_chirp = _positive(e["t_chirp_us"], "t_chirp_us", _number(e["t_chirp_us"], "t_chirp_us")) * 1e-6
    n_samples = _integer(e["n_samples"], "n_samples")
    fs = _positive(e["f_sample_hz"], "f_sample_hz", _number(e["f_sample_hz"], "f_sample_hz"))
    light = SPEED_OF_LIGHT
    if "c_m_per_s" in e:
        light = _positive(e["c_m_per_s"], "c_m_per_s", _number(e["c_m_per_s"], "c_m_per_s"))
    try:
        chirp = ChirpConfig(f0, slope, t_chirp, n_samples, fs, light)
    except ValueError as exc:
        raise ConfigError(c.line, f"[chirp]: {exc}") from None

    a = sections["array"].entries
    mode = _MODE_NAMES.get(a["mode"].value.lower())
    if mode is None:
        raise ConfigError(a["mode"].line, f"mode: expected monostatic or bistatic, got {a['mode'].value!r}")
    layout = ArrayLayout(_pairs_mm(a["tx_mm"], "tx_mm"), _pairs_mm(a["rx_mm"], "rx_mm"), mode)

    s = sections["scan"].entries
    nx, ny = _integer(s["nx"], "nx"), _integer(s["ny"], "ny")
    for key, n in (("nx", nx), ("ny", ny)):
        if n < 1:
            raise ConfigError(s[key].line, f"{key}: must be >= 1, got {n}")
    dx = _positive(s["dx_mm"], "dx_mm", _number(s["dx_mm"], "dx_mm")) * MM
    dy = _positive(s["dy_mm"], "dy_mm", _number(s["dy_mm"], "dy_mm")) * MM
    origin = (0.0, 0.0)
    if "origin_mm" in s:
        ox, oy = _numbers(s["origin_mm"], "origin_mm", 2)
        origin = (ox * MM, oy * MM)
    z_plane = _number(s["z_plane_mm"], "z_plane_mm") * MM if "z_plane_mm" in s else 0.0
    scan = ApertureScan(nx, ny, dx, dy, origin, z_plane)

    scatterers = []
    for key, entry in sections.get("scene", _Section(0)).entries.items():
        vals = _numbers(entry, key, (4, 5))
        x, y, z = (v * MM for v in vals[:3])
        if z <= z_plane:
            raise ConfigError(entry.line, f"{key}: z = {vals[2]} mm is not in front of the "
                                          f"aperture plane")
        refl = complex(vals[3], vals[4] if len(vals) == 5 else 0.0)
        scatterers.append(PointScatterer((x, y, z), refl))

    recon = _parse_recon(sections.get("recon", _Section(0)).entries)
    noise = _parse_noise(sections.get("noise", _Section(0)).entries)
    return RunConfig(chirp, layout, scan, Scene(scatterers), recon, noise)


def _parse_recon(r: dict[str, _Entry]) -> ReconParams:
    nz = None
    if "nz" in r and r["nz"].value.lower() != "auto":
        nz = _integer(r["nz"], "nz")
        if nz < 2:
            raise ConfigError(r["nz"].line, f"nz: must be >= 2, got {nz}")
    zero_pad = (1, 1)
    if "zero_pad" in r:
        vals = _numbers(r["zero_pad"], "zero_pad", (1, 2))
        if any(v != int(v) or v < 1 for v in vals):
            raise ConfigError(r["zero_pad"].line, "zero_pad: factors must be integers >= 1")
        zero_pad = (int(vals[0]), int(vals[-1]))
    window = "none"
    if "window" in r:
        window = r["window"].value.lower()
        if window not in WINDOWS:
            raise ConfigError(r["window"].line, f"window: expected one of {WINDOWS}")
    z0 = _number(r["z0_mm"], "z0_mm") * MM if "z0_mm" in r else None
    return ReconParams(nz, zero_pad, window, z0)


def _parse_noise(n: dict[str, _Entry]) -> NoiseParams:
    snr = _number(n["snr_db"], "snr_db") if "snr_db" in n else math.inf
    if math.isnan(snr) or snr == -math.inf:
        raise ConfigError(n["snr_db"].line, "snr_db: must be finite or +inf")
    seed = _integer(n["seed"], "seed") if "seed" in n else 0
    if seed < 0:
        raise ConfigError(n["seed"].line, "seed: must be non-negative")
    return NoiseParams(snr, seed)


def example_config_text() -> str:
    return resources.files("mimosar").joinpath("data/example.cfg").read_text()


def load_config(name_or_path: str) -> RunConfig:
    """Parse a config file; the name ``example`` selects the shipped example."""
    if name_or_path == EXAMPLE_NAME:
        return parse_config(example_config_text())
    with open(name_or_path, "rb") as fh:
        return parse_config(fh.read())
