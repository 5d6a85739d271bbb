"""Scenario configuration files (INI: ``key = value`` lines under ``[sections]``).

Recognised sections and keys, with defaults::

    [grid]          nx = 160, ny = 160, lx = 1, ly = 1
    [decomposition] mx = 8, my = 8            (or: list = 4x4, 8x8, 16x16)
    [field]         preset = combined, contrast = 1e8   (or: file = perm.bin)
    [boundary]      type = slab-flux | slab-pressure | quarter-five-spot | custom
                    velocity = 1, dp = 1, rate = 1
                    custom sides: left = pressure 1.0 / right = flux 1.0 / ...
    [method]        name = aMRCM, scheme = PBS, alpha = 1,
                    alpha_small = 1e-2, alpha_large = 1e2,
                    zeta_max = 1, zeta_min = 1, patch = 2
                    methods = MMMFEM-POL, MMMFEM-PBS   (solve only; default name-scheme)
    [sweep]         axis = contrast | alpha, values = 1e1, 1e2, ...
                    methods = MMMFEM-POL, MMMFEM-PBS
                    adaptive = 1e-2/1e2, 1e-6/1e6   (alpha axis only)
    [fluid]         m = 10
    [twophase]      c = 20, cfl = 0.9, s0 = 0, checkpoints = 0.02, 0.04, 0.06
                    methods = aMRCM-POL, aMRCM-PBS
    [output]        dir = out, vtk = yes, csv = yes

Relative file paths are resolved against the config file's directory.  The
``ROBINMS_OUT`` environment variable overrides the output directory.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigurationError
from .mrcm import KINDS
from .spaces import POL, PBS
from .scenarios import BOUNDARIES, FIELDS

SECTIONS = ("grid", "decomposition", "field", "boundary", "method", "sweep", "fluid", "twophase", "output")
OUT_ENV = "ROBINMS_OUT"


@dataclass(frozen=True)
class MethodSpec:
    """A method kind paired with an interface scheme, e.g. ``aMRCM-PBS``."""

    kind: str
    scheme: str

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        parts = text.strip().rsplit("-", 1)
        if len(parts) != 2:
            raise ConfigurationError(f"method {text!r} must look like KIND-SCHEME, e.g. aMRCM-PBS")
        kind = _canon_kind(parts[0])
        scheme = parts[1].upper()
        if scheme not in (POL, PBS):
            raise ConfigurationError(f"scheme {parts[1]!r} must be POL or PBS")
        return cls(kind, scheme)

    @property
    def label(self) -> str:
        return f"{self.kind}-{self.scheme}"


def _canon_kind(name: str) -> str:
    for k in KINDS:
        if k.lower() == name.strip().lower():
            return k
    raise ConfigurationError(f"unknown method {name!r}; choose from {KINDS}")


@dataclass(frozen=True)
class ScenarioConfig:
    source: Path | None = None
    nx: int = 160
    ny: int = 160
    lx: float = 1.0
    ly: float = 1.0
    decompositions: tuple[tuple[int, int], ...] = ((8, 8),)
    field_preset: str = "combined"
    contrast: float = 1e8
    field_file: Path | None = None
    boundary: str = "slab-flux"
    velocity: float = 1.0
    dp: float = 1.0
    rate: float = 1.0
    custom_sides: dict = field(default_factory=dict)
    method: str = "aMRCM"
    scheme: str = PBS
    alpha: float = 1.0
    alpha_small: float = 1e-2
    alpha_large: float = 1e2
    zeta_max: float = 1.0
    zeta_min: float = 1.0
    patch: int = 2
    solve_methods: tuple[MethodSpec, ...] = ()
    sweep_axis: str = "contrast"
    sweep_values: tuple[float, ...] = ()
    sweep_methods: tuple[MethodSpec, ...] = ()
    adaptive: tuple[tuple[float, float], ...] = ()
    M: float = 10.0
    C: int = 20
    cfl: float = 0.9
    s0: float = 0.0
    checkpoints: tuple[float, ...] = (0.06,)
    twophase_methods: tuple[MethodSpec, ...] = ()
    out_dir: Path = Path("out")
    vtk: bool = True
    csv: bool = True

    def with_overrides(self, *, out=None, method=None, scheme=None) -> "ScenarioConfig":
        kw = {}
        if out is not None:
            kw["out_dir"] = Path(out)
        if method is not None:
            kw["method"] = _canon_kind(method)
        if scheme is not None:
            s = scheme.upper()
            if s not in (POL, PBS):
                raise ConfigurationError(f"--scheme must be POL or PBS, got {scheme!r}")
            kw["scheme"] = s
        return replace(self, **kw)


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, path: Path):
        self.cp, self.path = cp, path

    def _where(self, sec, key):
        return f"{self.path}: [{sec}] {key}"

    def raw(self, sec, key, default=None):
        if self.cp.has_option(sec, key):
            return self.cp.get(sec, key).strip()
        return default

    def num(self, sec, key, default, kind=float, positive=False):
        v = self.raw(sec, key)
        if v is None:
            return default
        try:
            x = kind(float(v)) if kind is int and "e" in v.lower() else kind(v)
        except ValueError:
            raise ConfigurationError(f"{self._where(sec, key)}: expected a number, got {v!r}") from None
        if positive and not x > 0:
            raise ConfigurationError(f"{self._where(sec, key)}: must be positive, got {v!r}")
        return x

    def floats(self, sec, key, default=()):
        v = self.raw(sec, key)
        if v is None:
            return tuple(default)
        try:
            return tuple(float(t) for t in v.replace(";", ",").split(",") if t.strip())
        except ValueError:
            raise ConfigurationError(f"{self._where(sec, key)}: expected a comma-separated list of numbers") from None

    def words(self, sec, key):
        v = self.raw(sec, key)
        return () if v is None else tuple(t.strip() for t in v.split(",") if t.strip())

    def flag(self, sec, key, default):
        if not self.cp.has_option(sec, key):
            return default
        try:
            return self.cp.getboolean(sec, key)
        except ValueError:
            raise ConfigurationError(f"{self._where(sec, key)}: expected yes/no") from None

    def wrap(self, sec, key, fn, text):
        try:
            return fn(text)
        except ConfigurationError as exc:
            raise ConfigurationError(f"{self._where(sec, key)}: {exc}") from None


def _pair(text: str, sep: str) -> tuple[float, float]:
    a, _, b = text.partition(sep)
    try:
        return float(a), float(b)
    except ValueError:
        raise ConfigurationError(f"expected a pair like 1e-2{sep}1e2, got {text!r}") from None


def _side(text: str) -> tuple[str, float]:
    kind, _, val = text.strip().partition(" ")
    if kind not in ("pressure", "flux"):
        raise ConfigurationError(f"side condition must be 'pressure <value>' or 'flux <value>', got {text!r}")
    try:
        return kind, float(val)
    except ValueError:
        raise ConfigurationError(f"bad side value in {text!r}") from None


def load_config(path) -> ScenarioConfig:
    """Parse and validate a scenario file; errors name the file, section and key."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigurationError(f"{path}: unknown section [{sec}]; expected one of {SECTIONS}")
    r = _Reader(cp, path)
    base = path.parent
    d = ScenarioConfig()

    decs = d.decompositions
    if r.raw("decomposition", "list") is not None:
        decs = tuple(
            tuple(int(v) for v in r.wrap("decomposition", "list", lambda t: _pair(t, "x"), w))
            for w in r.words("decomposition", "list")
        )
    elif cp.has_section("decomposition"):
        decs = ((r.num("decomposition", "mx", 8, int, True), r.num("decomposition", "my", 8, int, True)),)

    field_file = r.raw("field", "file")
    preset = r.raw("field", "preset", d.field_preset)
    if field_file is None and preset not in FIELDS:
        raise ConfigurationError(f"{path}: [field] preset: unknown preset {preset!r}; choose from {sorted(FIELDS)}")
    bc = r.raw("boundary", "type", d.boundary)
    if bc not in BOUNDARIES + ("custom",):
        raise ConfigurationError(f"{path}: [boundary] type: unknown {bc!r}; choose from {BOUNDARIES + ('custom',)}")
    custom = {}
    if bc == "custom":
        for s in ("left", "right", "bottom", "top"):
            custom[s] = r.wrap("boundary", s, _side, r.raw("boundary", s, "flux 0"))

    axis = r.raw("sweep", "axis", d.sweep_axis)
    if axis not in ("contrast", "alpha"):
        raise ConfigurationError(f"{path}: [sweep] axis: must be contrast or alpha, got {axis!r}")
    scheme = r.raw("method", "scheme", d.scheme).upper()
    if scheme not in (POL, PBS):
        raise ConfigurationError(f"{path}: [method] scheme: must be POL or PBS, got {scheme!r}")

    cfg = ScenarioConfig(
        source=path,
        nx=r.num("grid", "nx", d.nx, int, True),
        ny=r.num("grid", "ny", d.ny, int, True),
        lx=r.num("grid", "lx", d.lx, float, True),
        ly=r.num("grid", "ly", d.ly, float, True),
        decompositions=decs,
        field_preset=preset,
        contrast=r.num("field", "contrast", d.contrast, float, True),
        field_file=(base / field_file) if field_file is not None else None,
        boundary=bc,
        velocity=r.num("boundary", "velocity", d.velocity),
        dp=r.num("boundary", "dp", d.dp),
        rate=r.num("boundary", "rate", d.rate, float, True),
        custom_sides=custom,
        method=r.wrap("method", "name", _canon_kind, r.raw("method", "name", d.method)),
        scheme=scheme,
        alpha=r.num("method", "alpha", d.alpha, float, True),
        alpha_small=r.num("method", "alpha_small", d.alpha_small, float, True),
        alpha_large=r.num("method", "alpha_large", d.alpha_large, float, True),
        zeta_max=r.num("method", "zeta_max", d.zeta_max, float, True),
        zeta_min=r.num("method", "zeta_min", d.zeta_min, float, True),
        patch=r.num("method", "patch", d.patch, int, True),
        solve_methods=tuple(r.wrap("method", "methods", MethodSpec.parse, w) for w in r.words("method", "methods")),
        sweep_axis=axis,
        sweep_values=r.floats("sweep", "values"),
        sweep_methods=tuple(r.wrap("sweep", "methods", MethodSpec.parse, w) for w in r.words("sweep", "methods")),
        adaptive=tuple(r.wrap("sweep", "adaptive", lambda t: _pair(t, "/"), w) for w in r.words("sweep", "adaptive")),
        M=r.num("fluid", "m", d.M, float, True),
        C=r.num("twophase", "c", d.C, int, True),
        cfl=r.num("twophase", "cfl", d.cfl, float, True),
        s0=r.num("twophase", "s0", d.s0),
        checkpoints=r.floats("twophase", "checkpoints", d.checkpoints),
        twophase_methods=tuple(
            r.wrap("twophase", "methods", MethodSpec.parse, w) for w in r.words("twophase", "methods")
        ),
        out_dir=Path(os.environ.get(OUT_ENV) or (base / r.raw("output", "dir", "out"))),
        vtk=r.flag("output", "vtk", d.vtk),
        csv=r.flag("output", "csv", d.csv),
    )
    for mx, my in cfg.decompositions:
        if cfg.nx % mx or cfg.ny % my:
            raise ConfigurationError(f"{path}: [decomposition]: {mx}x{my} does not divide the {cfg.nx}x{cfg.ny} grid")
    if any(v <= 0 for v in cfg.sweep_values):
        raise ConfigurationError(f"{path}: [sweep] values: must be positive")
    if any(c <= 0 for c in cfg.checkpoints):
        raise ConfigurationError(f"{path}: [twophase] checkpoints: must be positive")
    return cfg
