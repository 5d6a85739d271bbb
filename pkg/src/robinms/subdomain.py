"""Fine-scale Robin/Dirichlet/Neumann Darcy solves on one subdomain.

On a Robin edge of subdomain ``i`` the trace pressure is eliminated from

    -beta u.n_i + p_edge = -beta U s + P,      s = n_fixed . n_i,

with the half-cell Darcy law ``u.n_i = (p_cell - p_edge) / d``,
``d = h_normal / (2 kappa_cell)``.  Writing
``g = (p_cell - P - d s U) / (d + beta)`` the outward velocity is
``u.n_i = s U + g`` and the Robin mismatch is ``beta (u.n_i - s U) = beta g``.
Both forms stay accurate for ``beta`` from 1e-16 to 1e16.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boundary import BoundarySpec
from .errors import ContractViolation
from .grid import SIDES, Decomposition, Skeleton
from .spaces import InterfaceSpaces
from .tpfa import BlockOperator, SideBC, side_cells, side_geometry


@dataclass(frozen=True, eq=False)
class RobinSide:
    """Geometry and Robin parameter of one subdomain side lying on an interface."""

    side: str
    interface: int
    sign: int
    cells: np.ndarray  # local flat cell indices, ordered along the interface
    length: float
    d: np.ndarray  # h_normal / (2 kappa_inside)
    beta: np.ndarray

    @property
    def coef(self) -> np.ndarray:
        return self.length / (self.d + self.beta)

    @property
    def weight(self) -> np.ndarray:
        """``beta / (d + beta)`` evaluated without overflow."""
        return 1.0 / (1.0 + self.d / self.beta)


@dataclass(frozen=True, eq=False)
class RobinData:
    """Interface traces imposed on one side: flux ``U`` (along the fixed normal) and ``P``."""

    U: np.ndarray
    P: np.ndarray

    def trace(self, rs: RobinSide) -> np.ndarray:
        """Right-hand side ``r = -beta U s + P`` of the Robin condition."""
        return -rs.beta * self.U * rs.sign + self.P


@dataclass(frozen=True, eq=False)
class LocalSolution:
    pressure: np.ndarray  # (sy, sx)
    ux: np.ndarray  # (sy, sx + 1), oriented +x
    uy: np.ndarray  # (sy + 1, sx), oriented +y
    # per Robin side: outward velocity and eliminated edge pressure
    robin_flux: dict = field(default_factory=dict)
    robin_pressure: dict = field(default_factory=dict)


class SubdomainSolver:
    """Factorized local operator of subdomain ``n`` for a given kappa and alpha map."""

    def __init__(
        self,
        dec: Decomposition,
        skeleton: Skeleton,
        n: int,
        kappa: np.ndarray,
        bspec: BoundarySpec,
        alpha: list,
    ):
        self.dec, self.skeleton, self.n = dec, skeleton, n
        g = dec.grid
        self.slices = dec.cell_slices(n)
        self.kappa = np.asarray(kappa)[self.slices]
        self.shape = self.kappa.shape
        self.bspec = bspec
        self.q = bspec.q[self.slices]
        sides: dict[str, SideBC] = {}
        self.robin: list[RobinSide] = []
        self.external: dict[str, SideBC] = {}
        js, is_ = self.slices
        for side in SIDES:
            j, i = side_cells(self.shape, side)
            kin = self.kappa[j, i]
            entry = skeleton.sides[n][side]
            length, hn = side_geometry(side, g.hx, g.hy)
            if entry is None:
                sel = js if side in ("left", "right") else is_
                bc = bspec.side_bc(side, kin, sel)
                self.external[side] = bc
                sides[side] = bc
            else:
                k, s = entry
                d = hn / (2.0 * kin)
                beta = np.asarray(alpha[k], dtype=float) * dec.H / kin
                rs = RobinSide(side, k, s, j * self.shape[1] + i, length, d, beta)
                self.robin.append(rs)
                sides[side] = SideBC(rs.coef, np.zeros_like(d), np.zeros_like(d))
        self.op = BlockOperator(self.kappa, g.hx, g.hy, sides, split=True)

    @property
    def n_cells(self) -> int:
        return self.shape[0] * self.shape[1]

    def robin_rhs(self, rs: RobinSide, data: RobinData) -> np.ndarray:
        # coef * r = coef * P - length * w * s * U
        return rs.coef * data.P - rs.length * rs.weight * rs.sign * data.U

    def particular_rhs(self) -> np.ndarray:
        """Sources and external boundary data, homogeneous Robin traces."""
        b = self.q * self.dec.grid.cell_volume + self.op.boundary_rhs(
            {s: bc for s, bc in self.external.items()}
        )
        return b.ravel()

    def solve(self, robin: dict, homogeneous: bool = False) -> LocalSolution:
        """Solve with Robin traces ``robin[side] -> RobinData``; missing sides get zero traces."""
        b = np.zeros(self.n_cells) if homogeneous else self.particular_rhs()
        for rs in self.robin:
            if rs.side in robin:
                np.add.at(b, rs.cells, self.robin_rhs(rs, robin[rs.side]))
        p, c = self.op.solve_split(b)
        return self.reconstruct(p, c, robin, homogeneous)

    def robin_quantities(self, p: np.ndarray, c: float, rs: RobinSide, data: RobinData | None):
        """Outward velocity and mismatch ``g`` on one Robin side; pressure is ``p + c``."""
        pc = p[rs.cells]
        if data is None:
            U = P = 0.0
        else:
            U, P = data.U, data.P
        inv = 1.0 / (rs.d + rs.beta)
        g = c * inv + (pc - P - rs.d * rs.sign * U) * inv
        return rs.sign * U + g, g

    def reconstruct(self, p: np.ndarray, c: float, robin: dict, homogeneous: bool = False) -> LocalSolution:
        """Fluxes of the pressure ``p + c``; ``c`` is kept apart to preserve digits."""
        ny, nx = self.shape
        ux = np.zeros((ny, nx + 1))
        uy = np.zeros((ny + 1, nx))
        ix, iy = self.op.interior_fluxes(p)
        ux[:, 1:-1] = ix
        uy[1:-1, :] = iy
        rflux, rpress = {}, {}
        outward = {}
        for side, bc in self.external.items():
            if homogeneous:
                bc = SideBC(bc.coef, np.zeros_like(bc.trace), np.zeros_like(bc.flux))
            outward[side] = self.op.outward_velocity(p + c, side, bc)
        for rs in self.robin:
            u, _ = self.robin_quantities(p, c, rs, robin.get(rs.side))
            outward[rs.side] = u
            rflux[rs.side] = u
            rpress[rs.side] = p[rs.cells] + c - rs.d * u
        ux[:, 0] = -outward["left"]
        ux[:, -1] = outward["right"]
        uy[0, :] = -outward["bottom"]
        uy[-1, :] = outward["top"]
        # flux-space correction of the cell balances (see BlockOperator.face_fluxes)
        src = np.zeros(self.shape) if homogeneous else self.q * self.dec.grid.cell_volume
        for _ in range(2):
            r = src - self.op.divergence(ux, uy)
            dx, dy = self.op._fluxes(self.op.solve(r.ravel()), homogeneous=True)
            ux += dx
            uy += dy
        for rs in self.robin:
            j, i = side_cells(self.shape, rs.side)
            u = {"left": -ux[j, i], "right": ux[j, i + 1], "bottom": -uy[j, i], "top": uy[j + 1, i]}[rs.side]
            rpress[rs.side] = rpress[rs.side] - rs.d * (u - rflux[rs.side])
            rflux[rs.side] = u
        return LocalSolution((p + c).reshape(self.shape), ux, uy, rflux, rpress)


def local_solve(dec, skeleton, n, kappa, bspec, alpha, robin: dict) -> LocalSolution:
    """One local problem with the true sources/boundary data and the given Robin traces."""
    return SubdomainSolver(dec, skeleton, n, kappa, bspec, alpha).solve(robin)


@dataclass(eq=False)
class BasisResponses:
    """Pressure responses of one subdomain to every adjacent interface basis function.

    ``R[:, j] + cR[j]`` is the homogeneous response to local dof ``j`` and
    ``p0 + c0`` the particular solution, levels kept apart.  ``dofs`` maps
    local dof ``j`` to ``(interface, "U" | "P", basis index)`` and ``cols``
    to the global column.
    """

    solver: SubdomainSolver
    p0: np.ndarray
    c0: float
    R: np.ndarray
    cR: np.ndarray
    dofs: list
    cols: np.ndarray
    side_slices: dict  # side -> (U slice, P slice) into local dofs
    # small pressure corrections that restore exact cell balances
    corr0: np.ndarray | None = None
    corrR: np.ndarray | None = None

    @property
    def n_solves(self) -> int:
        return self.R.shape[1] + 1

    def traces(self, side: str, x_local: np.ndarray, spaces: InterfaceSpaces) -> RobinData:
        rs = next(r for r in self.solver.robin if r.side == side)
        us, ps = self.side_slices[side]
        U = spaces.flux[rs.interface].basis @ x_local[us]
        P = spaces.pressure[rs.interface].basis @ x_local[ps]
        return RobinData(U, P)

    def solution(self, x_local: np.ndarray | None, spaces: InterfaceSpaces, level: float | None = None) -> LocalSolution:
        """Superposed local solution for local coefficients ``x_local`` (None: particular).

        ``level`` overrides the superposed pressure level when it is known
        more accurately (from the global system).
        """
        if x_local is None:
            return self.solver.reconstruct(self.p0, self.c0 if level is None else level, {})
        p = self.p0 + self.R @ x_local
        c = self.c0 + float(self.cR @ x_local) if level is None else level
        robin = {rs.side: self.traces(rs.side, x_local, spaces) for rs in self.solver.robin}
        return self.solver.reconstruct(p, c, robin)

    def solutions(self, spaces: InterfaceSpaces) -> list[LocalSolution]:
        """Particular solution followed by one homogeneous response per basis function."""
        out = [self.solution(None, spaces)]
        for j in range(self.R.shape[1]):
            e = np.zeros(self.R.shape[1])
            e[j] = 1.0
            robin = {rs.side: self.traces(rs.side, e, spaces) for rs in self.solver.robin}
            out.append(self.solver.reconstruct(self.R[:, j], self.cR[j], robin, homogeneous=True))
        return out


def dof_offsets(spaces: InterfaceSpaces) -> tuple[np.ndarray, np.ndarray]:
    """Global column offsets of the U and P blocks of every interface."""
    nu = np.array([s.dim for s in spaces.flux], dtype=int)
    npr = np.array([s.dim for s in spaces.pressure], dtype=int)
    start = np.concatenate(([0], np.cumsum(nu + npr)[:-1])) if len(nu) else np.zeros(0, int)
    return start, start + nu


def compute_basis_responses(solver: SubdomainSolver, spaces: InterfaceSpaces) -> BasisResponses:
    """All local solves of one subdomain, sharing its factorization."""
    off_u, off_p = dof_offsets(spaces)
    dofs, cols, blocks = [], [], []
    side_slices = {}
    for rs in solver.robin:
        k = rs.interface
        Phi = spaces.flux[k].basis
        Psi = spaces.pressure[k].basis
        if Phi.shape[0] != len(rs.cells) or Psi.shape[0] != len(rs.cells):
            raise ContractViolation(f"interface {k}: space size does not match its edges")
        if np.any(np.all(Phi == 0, axis=0)) or np.any(np.all(Psi == 0, axis=0)):
            raise ContractViolation(f"interface {k}: zero basis function")
        base = len(dofs)
        # U-responses: r = -beta s phi  ->  rhs = -length * w * s * phi
        bu = np.zeros((solver.n_cells, Phi.shape[1]))
        bu[rs.cells] = -(rs.length * rs.weight * rs.sign)[:, None] * Phi
        bp = np.zeros((solver.n_cells, Psi.shape[1]))
        bp[rs.cells] = rs.coef[:, None] * Psi
        blocks += [bu, bp]
        dofs += [(k, "U", j) for j in range(Phi.shape[1])] + [(k, "P", j) for j in range(Psi.shape[1])]
        cols += list(range(off_u[k], off_u[k] + Phi.shape[1])) + list(range(off_p[k], off_p[k] + Psi.shape[1]))
        side_slices[rs.side] = (
            slice(base, base + Phi.shape[1]),
            slice(base + Phi.shape[1], base + Phi.shape[1] + Psi.shape[1]),
        )
    B = np.column_stack([solver.particular_rhs()] + blocks) if blocks else solver.particular_rhs()[:, None]
    X, c = solver.op.solve_split(B)
    # the LU leaves cell imbalances of order eps * T * |p|; a flux-space
    # correction makes every response conservative before its boundary
    # values enter the interface system
    dX, dc = solver.op.solve_split(solver.op.flux_residual(X, c, B))
    c = c + dc
    return BasisResponses(
        solver, X[:, 0], float(c[0]), X[:, 1:], c[1:], dofs, np.array(cols, dtype=int), side_slices,
        dX[:, 0], dX[:, 1:],
    )


def all_basis_responses(dec, skeleton, kappa, bspec, alpha, spaces, threads: int = 1) -> list[BasisResponses]:
    def work(n):
        return compute_basis_responses(SubdomainSolver(dec, skeleton, n, kappa, bspec, alpha), spaces)

    idx = range(dec.n_subdomains)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(work, idx))
    return [work(n) for n in idx]
