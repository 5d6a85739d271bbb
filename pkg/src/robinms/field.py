"""Permeability fields, synthetic generators with fractures and barriers and the fluid model."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ContractViolation, DataError
from .grid import FineGrid

_MAGIC = b"RMSPERM1"
_HEADER = struct.Struct("<8sII")
_S_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PermeabilityField:
    grid: FineGrid
    values: np.ndarray  # (ny, nx)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise DataError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise DataError("permeability must be finite and strictly positive")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def contrast(self) -> float:
        return float(self.values.max() / self.values.min())


@dataclass(frozen=True)
class Segment:
    """Straight feature from ``(x0, y0)`` to ``(x1, y1)``, ``width`` cells thick."""

    x0: float
    y0: float
    x1: float
    y1: float
    width: int = 1


@dataclass(frozen=True)
class FieldSpec:
    background: float = 1.0
    k_max: float = 1e8
    k_min: float = 1e-8
    fractures: tuple[Segment, ...] = ()
    barriers: tuple[Segment, ...] = ()
    # axis-aligned blocks (x0, y0, x1, y1) set to k_max (or k_min), for isolated inclusions
    inclusions: tuple[tuple[float, float, float, float], ...] = ()
    low_inclusions: tuple[tuple[float, float, float, float], ...] = ()

    def __post_init__(self):
        if not (0 < self.k_min <= self.background <= self.k_max):
            raise ConfigurationError(
                f"need 0 < k_min <= background <= k_max, got "
                f"{self.k_min}, {self.background}, {self.k_max}"
            )

    @property
    def contrast(self) -> float:
        return self.k_max / self.k_min


def rasterize_segment(seg: Segment, grid: FineGrid) -> np.ndarray:
    """Boolean mask of cells whose centers fall in the strip around ``seg``.

    The strip is measured along the minor axis of the segment, so every
    column (shallow segments) or row (steep segments) crossed by the segment
    receives exactly ``width`` cells.
    """
    eps = 1e-12
    for x in (seg.x0, seg.x1):
        if not (-eps <= x <= grid.Lx + eps):
            raise ConfigurationError(f"segment {seg} leaves the domain in x")
    for y in (seg.y0, seg.y1):
        if not (-eps <= y <= grid.Ly + eps):
            raise ConfigurationError(f"segment {seg} leaves the domain in y")
    if seg.width < 1:
        raise ConfigurationError("segment width must be at least one cell")
    X, Y = grid.cell_centers()
    dx, dy = seg.x1 - seg.x0, seg.y1 - seg.y0
    if abs(dx) / grid.hx >= abs(dy) / grid.hy:
        # shallow: parametrise by x
        lo, hi = sorted((seg.x0, seg.x1))
        inside = (X >= lo) & (X <= hi) if hi > lo else np.abs(X - lo) <= 0.5 * grid.hx
        slope = dy / dx if dx != 0 else 0.0
        yline = seg.y0 + slope * (X - seg.x0)
        delta = (Y - yline) / grid.hy
    else:
        lo, hi = sorted((seg.y0, seg.y1))
        inside = (Y >= lo) & (Y <= hi) if hi > lo else np.abs(Y - lo) <= 0.5 * grid.hy
        slope = dx / dy
        xline = seg.x0 + slope * (Y - seg.y0)
        delta = (X - xline) / grid.hx
    half = 0.5 * seg.width
    return inside & (delta >= -half) & (delta < half)


def generate_field(spec: FieldSpec, grid: FineGrid) -> PermeabilityField:
    K = np.full(grid.shape, float(spec.background))
    X, Y = grid.cell_centers()
    for blocks, value in ((spec.inclusions, spec.k_max), (spec.low_inclusions, spec.k_min)):
        for x0, y0, x1, y1 in blocks:
            if min(x0, x1) < 0 or max(x0, x1) > grid.Lx or min(y0, y1) < 0 or max(y0, y1) > grid.Ly:
                raise ConfigurationError(f"inclusion {(x0, y0, x1, y1)} leaves the domain")
            K[(X > x0) & (X < x1) & (Y > y0) & (Y < y1)] = value
    for seg in spec.fractures:
        K[rasterize_segment(seg, grid)] = spec.k_max
    # barriers drawn last: a crossing cell is a barrier cell
    for seg in spec.barriers:
        K[rasterize_segment(seg, grid)] = spec.k_min
    return PermeabilityField(grid, K)


def save_field(f: PermeabilityField, path) -> None:
    """Write CSV (``.csv``/``.txt``, one value per line) or raw little-endian binary."""
    path = Path(path)
    flat = f.values.ravel()
    if path.suffix.lower() in (".csv", ".txt"):
        path.write_text("\n".join(repr(v) for v in flat.tolist()) + "\n")
    else:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, f.grid.nx, f.grid.ny))
            fh.write(flat.astype("<f8").tobytes())


def load_field(path, grid: FineGrid) -> PermeabilityField:
    path = Path(path)
    if not path.exists():
        raise DataError(f"field file not found: {path}")
    if path.suffix.lower() in (".csv", ".txt"):
        try:
            vals = np.array(
                [float(line) for line in path.read_text().split() if line.strip()], dtype=float
            )
        except ValueError as exc:
            raise DataError(f"{path}: non-numeric entry ({exc})") from None
    else:
        raw = path.read_bytes()
        if len(raw) < _HEADER.size:
            raise DataError(f"{path}: truncated header")
        magic, nx, ny = _HEADER.unpack_from(raw)
        if magic != _MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        if (nx, ny) != (grid.nx, grid.ny):
            raise DataError(f"{path}: header says {nx}x{ny}, grid is {grid.nx}x{grid.ny}")
        body = raw[_HEADER.size:]
        if len(body) % 8:
            raise DataError(f"{path}: body is not a whole number of float64 values")
        vals = np.frombuffer(body, dtype="<f8").astype(float)
    if vals.size != grid.n_cells:
        raise DataError(f"{path}: expected {grid.n_cells} values, found {vals.size}")
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise DataError(f"{path}: permeability values must be finite and positive")
    return PermeabilityField(grid, vals.reshape(grid.shape))


@dataclass(frozen=True)
class FluidModel:
    """Quadratic relative permeabilities ``k_rw = s^2``, ``k_ro = (1 - s)^2``."""

    mu_w: float = 1.0
    mu_o: float = 10.0
    _fmax: float = field(default=0.0, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.mu_w > 0 and self.mu_o > 0):
            raise ConfigurationError("viscosities must be positive")
        s = np.linspace(0.0, 1.0, 1001)
        object.__setattr__(self, "_fmax", float(np.max(np.abs(self.dfractional_flow(s)))))

    @classmethod
    def from_ratio(cls, M: float) -> "FluidModel":
        return cls(mu_w=1.0, mu_o=float(M))

    @property
    def M(self) -> float:
        return self.mu_o / self.mu_w

    @property
    def max_dfdS(self) -> float:
        """``max |f'(s)|`` over a 1001-point grid of [0, 1]."""
        return self._fmax

    def total_mobility(self, s):
        s = _check_saturation(s)
        return s**2 / self.mu_w + (1.0 - s) ** 2 / self.mu_o

    def fractional_flow(self, s):
        s = _check_saturation(s)
        a = self.M * s**2
        return a / (a + (1.0 - s) ** 2)

    def dfractional_flow(self, s):
        s = _check_saturation(s)
        M = self.M
        den = M * s**2 + (1.0 - s) ** 2
        return 2.0 * M * s * (1.0 - s) / den**2


def _check_saturation(s):
    arr = np.asarray(s, dtype=float)
    if np.any(arr < -_S_TOL) or np.any(arr > 1.0 + _S_TOL) or np.any(~np.isfinite(arr)):
        raise ContractViolation("saturation outside [0, 1]")
    arr = np.clip(arr, 0.0, 1.0)
    return float(arr) if arr.ndim == 0 else arr


def total_mobility(s, fluid: FluidModel | None = None):
    return (fluid or FluidModel()).total_mobility(s)


def fractional_flow(s, fluid: FluidModel | None = None):
    return (fluid or FluidModel()).fractional_flow(s)
