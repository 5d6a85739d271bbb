"""Global boundary conditions and sources."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .grid import SIDES, FineGrid
from .tpfa import SideBC, dirichlet_coef, side_geometry


@dataclass(frozen=True, eq=False)
class BoundarySpec:
    """Per-face external conditions plus a cellwise source density.

    ``is_pressure[side][f]`` selects ``p = value`` (True) or outward normal
    velocity ``u.n = value`` (False).  ``q`` is a volumetric source density, so
    cell ``c`` produces ``q[c] * cell_volume`` per unit time.
    """

    grid: FineGrid
    is_pressure: dict
    value: dict
    q: np.ndarray

    def __post_init__(self):
        g = self.grid
        for side in SIDES:
            n = g.ny if side in ("left", "right") else g.nx
            if np.shape(self.is_pressure[side]) != (n,) or np.shape(self.value[side]) != (n,):
                raise ConfigurationError(f"boundary side {side!r} needs {n} entries")
        if np.shape(self.q) != g.shape:
            raise ConfigurationError("source array does not match the grid")

    @property
    def has_pressure(self) -> bool:
        return any(np.any(self.is_pressure[s]) for s in SIDES)

    def side_bc(self, side: str, kappa_cells: np.ndarray, sel=slice(None)) -> SideBC:
        """Boundary law for the faces ``sel`` of a global side, given the adjacent kappa."""
        isp = np.asarray(self.is_pressure[side])[sel]
        val = np.asarray(self.value[side], dtype=float)[sel]
        coef = np.where(isp, dirichlet_coef(kappa_cells, side, self.grid.hx, self.grid.hy), 0.0)
        return SideBC(coef, np.where(isp, val, 0.0), np.where(isp, 0.0, val))

    def net_source(self) -> float:
        return float(self.q.sum() * self.grid.cell_volume)

    def prescribed_outflow(self) -> float:
        """Integrated outward flux through the flux-type boundary faces."""
        total = 0.0
        for side in SIDES:
            length, _ = side_geometry(side, self.grid.hx, self.grid.hy)
            isp = np.asarray(self.is_pressure[side])
            total += float(np.sum(np.where(isp, 0.0, self.value[side]))) * length
        return total

    def check_compatible(self, rtol: float = 1e-10) -> None:
        if self.has_pressure:
            return
        src, out = self.net_source(), self.prescribed_outflow()
        scale = max(abs(src), abs(out), float(np.abs(self.q).sum() * self.grid.cell_volume), 1e-300)
        if abs(src - out) > rtol * scale:
            raise ConfigurationError(
                f"all-flux boundary data are incompatible: sources {src:.6g} vs outflow {out:.6g}"
            )


def _sides(grid, fill_p, fill_v):
    return (
        {s: np.full(grid.ny if s in ("left", "right") else grid.nx, fill_p, dtype=bool) for s in SIDES},
        {s: np.full(grid.ny if s in ("left", "right") else grid.nx, fill_v, dtype=float) for s in SIDES},
    )


def slab_flux(grid: FineGrid, velocity: float = 1.0) -> BoundarySpec:
    """Uniform inflow on the left, outflow on the right, no flow on top and bottom."""
    isp, val = _sides(grid, False, 0.0)
    val["left"][:] = -velocity
    val["right"][:] = velocity
    return BoundarySpec(grid, isp, val, np.zeros(grid.shape))


def slab_pressure(grid: FineGrid, p_left: float = 1.0, p_right: float = 0.0) -> BoundarySpec:
    """Pressure on the left and right, no flow on top and bottom."""
    isp, val = _sides(grid, False, 0.0)
    isp["left"][:] = True
    isp["right"][:] = True
    val["left"][:] = p_left
    val["right"][:] = p_right
    return BoundarySpec(grid, isp, val, np.zeros(grid.shape))


def quarter_five_spot(grid: FineGrid, rate: float = 1.0) -> BoundarySpec:
    """Injector in the bottom-left cell, producer in the top-right cell, closed boundary."""
    isp, val = _sides(grid, False, 0.0)
    q = np.zeros(grid.shape)
    q[0, 0] = rate / grid.cell_volume
    q[-1, -1] = -rate / grid.cell_volume
    return BoundarySpec(grid, isp, val, q)
