"""Two-point flux approximation on a rectangular block of fine cells.

Every boundary face of a block is described by an affine outward-flux law

    F_out = coef * (p_cell - trace) + length * flux

which covers Dirichlet (``coef = 2 kappa len / h``), Robin
(``coef = len / (h / (2 kappa) + beta)``) and Neumann (``coef = 0``) faces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverError
from .grid import SIDES


@dataclass
class SideBC:
    """Boundary law on one side of a block, one entry per face."""

    coef: np.ndarray
    trace: np.ndarray
    flux: np.ndarray  # prescribed outward velocity

    @classmethod
    def neumann(cls, z) -> "SideBC":
        z = np.asarray(z, dtype=float)
        return cls(np.zeros_like(z), np.zeros_like(z), z.copy())


def side_cells(shape: tuple[int, int], side: str):
    """Local ``(j, i)`` of the cells along ``side``, ordered by increasing coordinate."""
    ny, nx = shape
    if side == "left":
        return np.arange(ny), np.zeros(ny, int)
    if side == "right":
        return np.arange(ny), np.full(ny, nx - 1)
    if side == "bottom":
        return np.zeros(nx, int), np.arange(nx)
    if side == "top":
        return np.full(nx, ny - 1), np.arange(nx)
    raise ValueError(side)


def side_geometry(side: str, hx: float, hy: float) -> tuple[float, float]:
    """``(face length, cell size normal to the face)``."""
    return (hy, hx) if side in ("left", "right") else (hx, hy)


def dirichlet_coef(kappa_cells, side, hx, hy):
    length, hn = side_geometry(side, hx, hy)
    return 2.0 * kappa_cells * length / hn


def interior_transmissibilities(kappa: np.ndarray, hx: float, hy: float):
    """Harmonic-mean transmissibilities of the interior x- and y-faces."""
    inv = 1.0 / kappa
    tx = hy / (0.5 * hx * (inv[:, :-1] + inv[:, 1:]))
    ty = hx / (0.5 * hy * (inv[:-1, :] + inv[1:, :]))
    return tx, ty


class BlockOperator:
    """Assembled and factorized TPFA operator on a block of cells.

    If no boundary face carries a positive coefficient the operator is
    floating (pure Neumann); it is then bordered with a zero-sum constraint so
    the pressure is fixed up to that gauge and any data defect is spread
    uniformly (callers check compatibility beforehand).

    With ``split=True`` a non-floating operator returns pressures as a
    zero-sum part plus a separate level ``c``.  When the boundary coefficients
    are tiny (Robin with large beta) the level is huge while the zero-sum part
    stays O(1); keeping them apart preserves the digits of every flux.
    """

    def __init__(self, kappa: np.ndarray, hx: float, hy: float, sides: dict[str, SideBC], split: bool = False):
        self.kappa = np.asarray(kappa, dtype=float)
        self.shape = self.kappa.shape
        self.hx, self.hy = hx, hy
        self.sides = sides
        ny, nx = self.shape
        n = nx * ny
        self.tx, self.ty = interior_transmissibilities(self.kappa, hx, hy)
        idx = np.arange(n).reshape(self.shape)
        diag = np.zeros(self.shape)
        diag[:, :-1] += self.tx
        diag[:, 1:] += self.tx
        diag[:-1, :] += self.ty
        diag[1:, :] += self.ty
        for side, bc in sides.items():
            j, i = side_cells(self.shape, side)
            np.add.at(diag, (j, i), bc.coef)
        rows = [idx.ravel(), idx[:, :-1].ravel(), idx[:, 1:].ravel(), idx[:-1, :].ravel(), idx[1:, :].ravel()]
        cols = [idx.ravel(), idx[:, 1:].ravel(), idx[:, :-1].ravel(), idx[1:, :].ravel(), idx[:-1, :].ravel()]
        vals = [diag.ravel(), -self.tx.ravel(), -self.tx.ravel(), -self.ty.ravel(), -self.ty.ravel()]
        A = sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
        self.floating = not any(np.any(bc.coef > 0) for bc in sides.values())
        self.split = split and not self.floating
        self._cscale = 1.0
        if self.floating:
            e = np.ones((n, 1))
            A = sp.bmat([[A, sp.csc_matrix(e)], [sp.csc_matrix(e.T), None]], format="csc")
        elif self.split:
            # A @ 1 is the boundary coefficient vector; scale its column to O(diag)
            cvec = np.zeros(self.shape)
            for side, bc in sides.items():
                j, i = side_cells(self.shape, side)
                np.add.at(cvec, (j, i), bc.coef)
            cvec = cvec.ravel()
            self._cscale = float(np.median(diag)) / float(cvec.max())
            col = sp.csc_matrix((cvec * self._cscale)[:, None])
            row = sp.csc_matrix(np.ones((1, n)))
            A = sp.bmat([[A, col], [row, None]], format="csc")
        self.n = n
        try:
            # TPFA blocks are M-matrices, so diagonal pivots are safe; row
            # pivoting would drag the dense border row forward and fill in
            self._lu = spla.splu(A, permc_spec="COLAMD", diag_pivot_thresh=0.0)
        except RuntimeError as exc:
            raise SolverError(f"TPFA factorization failed: {exc}") from None

    def boundary_rhs(self, sides: dict[str, SideBC] | None = None) -> np.ndarray:
        sides = self.sides if sides is None else sides
        b = np.zeros(self.shape)
        for side, bc in sides.items():
            length, _ = side_geometry(side, self.hx, self.hy)
            j, i = side_cells(self.shape, side)
            np.add.at(b, (j, i), bc.coef * bc.trace - length * bc.flux)
        return b

    def solve_split(self, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pressures as ``(zero-sum part, level)``; level is zero unless ``split``."""
        rhs = np.asarray(rhs, dtype=float)
        one = rhs.ndim == 1
        R = rhs.reshape(self.n, -1)
        bordered = self.floating or self.split
        if bordered:
            R = np.vstack([R, np.zeros((1, R.shape[1]))])
        X = self._lu.solve(np.ascontiguousarray(R))
        if not np.all(np.isfinite(X)):
            raise SolverError("TPFA solve produced non-finite pressures")
        c = X[-1] * self._cscale if self.split else np.zeros(X.shape[1])
        if bordered:
            X = X[:-1]
        return (X[:, 0], float(c[0])) if one else (X, c)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for cell pressures; ``rhs`` is ``(n,)`` or ``(n, k)`` cell-ordered."""
        p, c = self.solve_split(rhs)
        return p + c

    def interior_fluxes(self, p: np.ndarray):
        """Velocities on interior faces, oriented +x / +y."""
        p = p.reshape(self.shape)
        ux = self.tx * (p[:, :-1] - p[:, 1:]) / self.hy
        uy = self.ty * (p[:-1, :] - p[1:, :]) / self.hx
        return ux, uy

    def outward_velocity(self, p: np.ndarray, side: str, bc: SideBC | None = None) -> np.ndarray:
        bc = self.sides[side] if bc is None else bc
        length, _ = side_geometry(side, self.hx, self.hy)
        j, i = side_cells(self.shape, side)
        pc = p.reshape(self.shape)[j, i]
        return bc.coef * (pc - bc.trace) / length + bc.flux

    def flux_residual(self, P: np.ndarray, c: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Cell balance residual ``B - A (P + c)`` evaluated face by face.

        Interior terms are summed as two-point differences, the way fluxes
        are later evaluated, and the level enters through the boundary
        coefficients only.  ``P`` and ``B`` are ``(n, k)``, ``c`` is ``(k,)``.
        """
        ny, nx = self.shape
        k = P.shape[1]
        p3 = P.reshape(ny, nx, k)
        div = np.zeros((ny, nx, k))
        fx = self.tx[:, :, None] * (p3[:, :-1] - p3[:, 1:])
        fy = self.ty[:, :, None] * (p3[:-1, :] - p3[1:, :])
        div[:, :-1] += fx
        div[:, 1:] -= fx
        div[:-1, :] += fy
        div[1:, :] -= fy
        cvec = np.zeros(self.shape)
        for side, bc in self.sides.items():
            j, i = side_cells(self.shape, side)
            np.add.at(cvec, (j, i), bc.coef)
        cvec = cvec.reshape(-1, 1)
        return B - div.reshape(-1, k) - cvec * P - cvec * np.asarray(c)[None, :]

    def divergence(self, ux: np.ndarray, uy: np.ndarray) -> np.ndarray:
        """Integrated net outflow per cell."""
        return (ux[:, 1:] - ux[:, :-1]) * self.hy + (uy[1:, :] - uy[:-1, :]) * self.hx

    def face_fluxes(self, p: np.ndarray, rhs: np.ndarray | None = None, sweeps: int = 2):
        """Full staggered ``(ux, uy)`` of the block, boundary faces included.

        With the right-hand side given, the cell balances are corrected in
        flux space: the residual of the face fluxes is solved for a small
        pressure correction whose fluxes are added.  Fluxes taken from
        differences of large pressures in high-contrast blocks otherwise miss
        conservation by ``eps * T * |p|``.
        """
        ux, uy = self._fluxes(p, homogeneous=False)
        if rhs is None:
            return ux, uy
        rhs = np.asarray(rhs, dtype=float).reshape(self.shape)
        for _ in range(sweeps):
            r = rhs - self.divergence(ux, uy)
            if self.floating:
                r = r - r.mean()
            dx, dy = self._fluxes(self.solve(r.ravel()), homogeneous=True)
            ux += dx
            uy += dy
        return ux, uy

    def _fluxes(self, p: np.ndarray, homogeneous: bool):
        ny, nx = self.shape
        ux = np.zeros((ny, nx + 1))
        uy = np.zeros((ny + 1, nx))
        ix, iy = self.interior_fluxes(p)
        ux[:, 1:-1] = ix
        uy[1:-1, :] = iy
        for side in SIDES:
            if side not in self.sides:
                continue
            bc = self.sides[side]
            if homogeneous:
                bc = SideBC(bc.coef, np.zeros_like(bc.trace), np.zeros_like(bc.flux))
            out = self.outward_velocity(p, side, bc)
            if side == "left":
                ux[:, 0] = -out
            elif side == "right":
                ux[:, -1] = out
            elif side == "bottom":
                uy[0, :] = -out
            else:
                uy[-1, :] = out
        return ux, uy
