"""Fine Cartesian grid, uniform subdomain decomposition and its skeleton.

Cells are indexed ``(j, i)`` with ``i`` along x; flattened arrays are
row-major with x fastest, i.e. ``c = i + j * nx``.  Face-based arrays use the
staggered layout ``ux[j, i]`` (x-normal faces, shape ``(ny, nx + 1)``) and
``uy[j, i]`` (y-normal faces, shape ``(ny + 1, nx)``), oriented along +x/+y.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigurationError

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class FineGrid:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` arrays of shape ``(ny, nx)``."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y)


def build_grid(nx: int, ny: int, Lx: float = 1.0, Ly: float = 1.0) -> FineGrid:
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ConfigurationError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    if not (Lx > 0 and Ly > 0) or not np.isfinite([Lx, Ly]).all():
        raise ConfigurationError(f"domain extents must be positive, got Lx={Lx}, Ly={Ly}")
    return FineGrid(int(nx), int(ny), float(Lx), float(Ly))


@dataclass(frozen=True)
class Interface:
    """One maximal straight interface shared by two adjacent subdomains.

    ``normal`` is ``"x"`` for vertical interfaces and ``"y"`` for horizontal
    ones; the fixed normal always points towards ``plus``, the subdomain with
    the larger index.  ``line`` is the face index across the normal direction
    (column of ``ux`` or row of ``uy``) and ``start:stop`` the tangential cell
    range, so edges are ordered by increasing tangential coordinate.
    """

    index: int
    normal: str
    minus: int
    plus: int
    line: int
    start: int
    stop: int
    edge_length: float
    normal_spacing: float

    @property
    def m(self) -> int:
        return self.stop - self.start

    @property
    def length(self) -> float:
        return self.m * self.edge_length

    def cells(self, side: int) -> tuple[np.ndarray, np.ndarray]:
        """Fine cells ``(j, i)`` touching the interface from ``minus`` (-1) or ``plus`` (+1)."""
        t = np.arange(self.start, self.stop)
        across = self.line - 1 if side < 0 else self.line
        if self.normal == "x":
            return t, np.full_like(t, across)
        return np.full_like(t, across), t

    def faces(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices ``(j, i)`` into ``ux`` (normal x) or ``uy`` (normal y)."""
        t = np.arange(self.start, self.stop)
        if self.normal == "x":
            return t, np.full_like(t, self.line)
        return np.full_like(t, self.line), t

    def local_coordinates(self) -> np.ndarray:
        """Edge midpoints in the interface coordinate scaled to [0, 1]."""
        return (np.arange(self.m) + 0.5) / self.m


@dataclass(frozen=True)
class Decomposition:
    grid: FineGrid
    mx: int
    my: int

    @property
    def sx(self) -> int:
        return self.grid.nx // self.mx

    @property
    def sy(self) -> int:
        return self.grid.ny // self.my

    @property
    def n_subdomains(self) -> int:
        return self.mx * self.my

    @property
    def H(self) -> float:
        return max(self.grid.Lx / self.mx, self.grid.Ly / self.my)

    def position(self, n: int) -> tuple[int, int]:
        return n % self.mx, n // self.mx

    def index(self, I: int, J: int) -> int:
        return I + J * self.mx

    def cell_slices(self, n: int) -> tuple[slice, slice]:
        I, J = self.position(n)
        return slice(J * self.sy, (J + 1) * self.sy), slice(I * self.sx, (I + 1) * self.sx)

    def owner(self) -> np.ndarray:
        """Subdomain index of every fine cell, shape ``(ny, nx)``."""
        g = self.grid
        I = np.arange(g.nx) // self.sx
        J = np.arange(g.ny) // self.sy
        return I[None, :] + self.mx * J[:, None]


@dataclass(frozen=True)
class Skeleton:
    interfaces: tuple[Interface, ...]
    # sides[n][side] = (interface index, sign of n_fixed . n_outward) or None
    sides: tuple[dict, ...] = field(repr=False)

    @property
    def M(self) -> int:
        return len(self.interfaces)

    def sign(self, k: int, n: int) -> int:
        itf = self.interfaces[k]
        if n == itf.minus:
            return 1
        if n == itf.plus:
            return -1
        raise ValueError(f"subdomain {n} does not touch interface {k}")

    @cached_property
    def n_edges(self) -> int:
        return sum(itf.m for itf in self.interfaces)


def build_decomposition(grid: FineGrid, mx: int, my: int) -> tuple[Decomposition, Skeleton]:
    if mx < 1 or my < 1 or grid.nx % mx or grid.ny % my:
        raise ConfigurationError(
            f"{grid.nx}x{grid.ny} cells cannot be split into {mx}x{my} equal subdomains"
        )
    dec = Decomposition(grid, int(mx), int(my))
    sx, sy = dec.sx, dec.sy
    interfaces: list[Interface] = []
    sides: list[dict] = [dict.fromkeys(SIDES) for _ in range(dec.n_subdomains)]
    # vertical interfaces first, then horizontal; each group ordered by minus index
    for J in range(my):
        for I in range(mx - 1):
            a, b = dec.index(I, J), dec.index(I + 1, J)
            k = len(interfaces)
            interfaces.append(
                Interface(k, "x", a, b, (I + 1) * sx, J * sy, (J + 1) * sy, grid.hy, grid.hx)
            )
            sides[a]["right"] = (k, 1)
            sides[b]["left"] = (k, -1)
    for J in range(my - 1):
        for I in range(mx):
            a, b = dec.index(I, J), dec.index(I, J + 1)
            k = len(interfaces)
            interfaces.append(
                Interface(k, "y", a, b, (J + 1) * sy, I * sx, (I + 1) * sx, grid.hx, grid.hy)
            )
            sides[a]["top"] = (k, 1)
            sides[b]["bottom"] = (k, -1)
    return dec, Skeleton(tuple(interfaces), tuple(sides))
