"""Global interface problem of the multiscale Robin coupled method.

Unknowns are the coefficients of the interface flux ``U_H`` and pressure
``P_H`` in their per-interface bases.  Rows tested with pressure functions
impose weak continuity of the normal flux, rows tested with flux functions
the beta-weighted Robin mismatch (weak pressure continuity).  Edge integrals
are sums ``sum_e f_e g_e |e|``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boundary import BoundarySpec
from .errors import ConfigurationError, ContractViolation, SolverError
from .field import PermeabilityField
from .grid import SIDES, Decomposition, FineGrid, Skeleton
from .spaces import (
    PBS,
    ClassifierConfig,
    InterfaceClassification,
    InterfaceSpaces,
    assemble_spaces,
    classify,
)
from .subdomain import BasisResponses, all_basis_responses, dof_offsets
from .tpfa import BlockOperator, side_cells

log = logging.getLogger(__name__)

MMMFEM_ALPHA = 1e-6
MHM_ALPHA = 1e6
KINDS = ("MRCM", "MMMFEM", "MHM", "aMRCM")


@dataclass(frozen=True)
class MethodPreset:
    kind: str = "aMRCM"
    alpha: float = 1.0  # used by the constant-alpha MRCM kind
    alpha_small: float = 1e-2
    alpha_large: float = 1e2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown method {self.kind!r}; choose from {KINDS}")
        if self.alpha <= 0 or not (0 < self.alpha_small < self.alpha_large):
            raise ConfigurationError("alpha values must be positive with alpha_small < alpha_large")

    @classmethod
    def mmmfem(cls) -> "MethodPreset":
        return cls("MMMFEM", alpha=MMMFEM_ALPHA)

    @classmethod
    def mhm(cls) -> "MethodPreset":
        return cls("MHM", alpha=MHM_ALPHA)

    @classmethod
    def mrcm(cls, alpha: float) -> "MethodPreset":
        return cls("MRCM", alpha=alpha)

    @classmethod
    def amrcm(cls, alpha_small: float = 1e-2, alpha_large: float = 1e2) -> "MethodPreset":
        return cls("aMRCM", alpha_small=alpha_small, alpha_large=alpha_large)

    @classmethod
    def from_name(cls, name: str, **kw) -> "MethodPreset":
        name = name.strip()
        table = {"mmmfem": cls.mmmfem, "mhm": cls.mhm}
        if name.lower() in table:
            return table[name.lower()]()
        if name.lower() == "amrcm":
            return cls.amrcm(**{k: v for k, v in kw.items() if k in ("alpha_small", "alpha_large")})
        if name.lower() == "mrcm":
            return cls.mrcm(kw.get("alpha", 1.0))
        raise ConfigurationError(f"unknown method {name!r}")

    @property
    def label(self) -> str:
        if self.kind == "MRCM":
            return f"MRCM(alpha={self.alpha:g})"
        if self.kind == "aMRCM" and (self.alpha_small, self.alpha_large) != (1e-2, 1e2):
            return f"aMRCM({self.alpha_small:g}/{self.alpha_large:g})"
        return self.kind

    def alpha_map(self, classification: InterfaceClassification) -> list[np.ndarray]:
        out = []
        for lab in classification.labels:
            if self.kind == "aMRCM":
                out.append(np.where(lab.fracture, self.alpha_small, self.alpha_large))
            else:
                a = {"MMMFEM": MMMFEM_ALPHA, "MHM": MHM_ALPHA}.get(self.kind, self.alpha)
                out.append(np.full(lab.fracture.shape, a))
        return out

    @property
    def space_switches(self) -> dict:
        """The mortar limit only sees pressure spaces, the hybrid limit only flux spaces."""
        return {
            "MMMFEM": dict(pressure_pbs=True, flux_pbs=False),
            "MHM": dict(pressure_pbs=False, flux_pbs=True),
        }.get(self.kind, dict(pressure_pbs=True, flux_pbs=True))


@dataclass(frozen=True, eq=False)
class FaceFlux:
    """Single-valued staggered velocity field."""

    ux: np.ndarray
    uy: np.ndarray

    def cell_velocity(self) -> tuple[np.ndarray, np.ndarray]:
        return 0.5 * (self.ux[:, :-1] + self.ux[:, 1:]), 0.5 * (self.uy[:-1, :] + self.uy[1:, :])

    def divergence_residual(self, grid: FineGrid, q: np.ndarray) -> np.ndarray:
        """Net integrated outflow minus ``q * vol`` per cell."""
        out = (self.ux[:, 1:] - self.ux[:, :-1]) * grid.hy + (self.uy[1:, :] - self.uy[:-1, :]) * grid.hx
        return out - q * grid.cell_volume


@dataclass(frozen=True, eq=False)
class InterfaceSolution:
    U: tuple[np.ndarray, ...]
    P: tuple[np.ndarray, ...]
    gauge_shift: float = 0.0


@dataclass(eq=False)
class MultiscaleSolution:
    """Cell pressures plus a two-valued face velocity field.

    ``flux_minus`` holds every face velocity as seen from the cell on its
    left/bottom, ``flux_plus`` as seen from the right/top; they differ only on
    the skeleton.  A fine-grid solution has both equal.
    """

    grid: FineGrid
    pressure: np.ndarray
    flux_minus: FaceFlux
    flux_plus: FaceFlux
    kappa: np.ndarray
    bspec: BoundarySpec
    decomposition: Decomposition | None = None
    skeleton: Skeleton | None = None
    interface: InterfaceSolution | None = None
    spaces: InterfaceSpaces | None = None
    responses: list = field(default_factory=list, repr=False)
    pressure_shift: float = 0.0

    @property
    def single_valued(self) -> bool:
        return bool(
            np.array_equal(self.flux_minus.ux, self.flux_plus.ux)
            and np.array_equal(self.flux_minus.uy, self.flux_plus.uy)
        )

    def cell_velocity(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-averaged velocity built from each cell's own face values."""
        vx = 0.5 * (self.flux_plus.ux[:, :-1] + self.flux_minus.ux[:, 1:])
        vy = 0.5 * (self.flux_plus.uy[:-1, :] + self.flux_minus.uy[1:, :])
        return vx, vy

    def divergence_residual(self) -> np.ndarray:
        g = self.grid
        out = (self.flux_minus.ux[:, 1:] - self.flux_plus.ux[:, :-1]) * g.hy + (
            self.flux_minus.uy[1:, :] - self.flux_plus.uy[:-1, :]
        ) * g.hx
        return out - self.bspec.q * g.cell_volume

    def mean_flux(self) -> FaceFlux:
        return FaceFlux(0.5 * (self.flux_minus.ux + self.flux_plus.ux), 0.5 * (self.flux_minus.uy + self.flux_plus.uy))


def _zero_mean(p: np.ndarray) -> tuple[np.ndarray, float]:
    shift = float(p.mean())
    return p - shift, shift


def fine_reference_solve(
    grid: FineGrid, field: PermeabilityField, bspec: BoundarySpec, mobility=None
) -> MultiscaleSolution:
    """Monolithic TPFA solve on the whole grid."""
    kappa = _kappa(field, mobility)
    bspec.check_compatible()
    sides = {}
    for side in SIDES:
        j, i = side_cells(grid.shape, side)
        sides[side] = bspec.side_bc(side, kappa[j, i])
    op = BlockOperator(kappa, grid.hx, grid.hy, sides)
    b = bspec.q * grid.cell_volume + op.boundary_rhs()
    p = op.solve(b.ravel()).reshape(grid.shape)
    shift = 0.0
    if not bspec.has_pressure:
        p, shift = _zero_mean(p)
    ux, uy = op.face_fluxes(p, rhs=bspec.q * grid.cell_volume)
    f = FaceFlux(ux, uy)
    return MultiscaleSolution(grid, p, f, f, kappa, bspec, pressure_shift=shift)


def _kappa(field: PermeabilityField, mobility) -> np.ndarray:
    if mobility is None:
        return np.array(field.values)
    mob = np.broadcast_to(np.asarray(mobility, dtype=float), field.grid.shape)
    if np.any(mob <= 0):
        raise ContractViolation("mobility must be positive")
    return field.values * mob


@dataclass(eq=False)
class GlobalSystem:
    """Interface unknowns followed by one pressure level per subdomain.

    The level rows read ``lambda_n - cR . x = c0``: each subdomain's pressure
    is its zero-sum local part plus ``lambda_n``.  After row scaling they tend
    to the subdomain compatibility condition as beta grows, which keeps the
    hybrid limit well conditioned.
    """

    A: sp.csc_matrix
    b: np.ndarray
    constant_mode: np.ndarray  # shift of every pressure by one
    n_interface: int


def assemble_global(responses: list[BasisResponses], spaces: InterfaceSpaces, skeleton: Skeleton) -> GlobalSystem:
    ni = spaces.size
    size = ni + len(responses)
    off_u, off_p = dof_offsets(spaces)
    rows, cols, vals = [], [], []
    b = np.zeros(size)

    def put(r0, block, cc):
        nr = block.shape[0]
        rows.append(np.repeat(np.arange(r0, r0 + nr), block.shape[1]))
        cols.append(np.tile(cc, nr))
        vals.append(block.ravel())

    for n, br in enumerate(responses):
        lev = ni + n
        put(lev, np.concatenate(([1.0], -br.cR))[None, :], np.concatenate(([lev], br.cols)))
        b[lev] = br.c0
        for rs in br.solver.robin:
            k, s = rs.interface, rs.sign
            Phi = spaces.flux[k].basis
            Psi = spaces.pressure[k].basis
            if Phi.shape[0] != len(rs.cells) or Psi.shape[0] != len(rs.cells):
                raise ContractViolation(f"interface {k}: dimension mismatch")
            us, ps = br.side_slices[rs.side]
            # mismatch numerator p_cell - P - d s U; the level enters with weight one
            num = br.R[rs.cells, :] + br.corrR[rs.cells, :]
            num[:, ps] -= Psi
            num[:, us] -= (rs.d * s)[:, None] * Phi
            num = np.column_stack([np.ones(len(rs.cells)), num])
            num0 = br.p0[rs.cells] + br.corr0[rs.cells]
            inv = 1.0 / (rs.d + rs.beta)
            # outward velocity s U + g
            Uf = num * inv[:, None]
            Uf[:, 1:][:, us] += s * Phi
            wl = rs.length * rs.weight * s
            cc = np.concatenate(([lev], br.cols))
            put(off_p[k], Psi.T @ (rs.length * Uf), cc)
            b[off_p[k]:off_p[k] + Psi.shape[1]] -= Psi.T @ (rs.length * num0 * inv)
            put(off_u[k], Phi.T @ (wl[:, None] * num), cc)
            b[off_u[k]:off_u[k] + Phi.shape[1]] -= Phi.T @ (wl * num0)
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    ) if rows else sp.csc_matrix((size, size))
    mode = np.zeros(size)
    for k in range(len(spaces)):
        c = spaces.pressure[k].constant_coefficients()
        mode[off_p[k]:off_p[k] + len(c)] = c
    mode[ni:] = 1.0
    return GlobalSystem(A, b, mode, ni)


def solve_global(system: GlobalSystem, gauge: bool) -> tuple[np.ndarray, float]:
    """Row-equilibrated sparse LU; bordered with the constant mode when ``gauge``."""
    A, b = system.A, system.b
    n = A.shape[0]
    if n == 0:
        return np.zeros(0), 0.0
    rmax = np.asarray(abs(A).max(axis=1).todense()).ravel()
    if np.any(rmax == 0):
        raise SolverError("interface system has an empty row (dimension mismatch)")
    D = sp.diags(1.0 / rmax)
    As, bs = (D @ A).tocsc(), b / rmax
    if gauge:
        v = system.constant_mode / np.linalg.norm(system.constant_mode)
        vc = sp.csc_matrix(v[:, None])
        As = sp.bmat([[As, vc], [vc.T, None]], format="csc")
        bs = np.concatenate([bs, [0.0]])
    try:
        lu = spla.splu(As, permc_spec="COLAMD")
    except RuntimeError as exc:
        hint = "" if gauge else " (pressure level may be undetermined: no pressure boundary)"
        raise SolverError(f"singular interface system{hint}: {exc}") from None
    x = lu.solve(bs)
    for _ in range(3):
        x += lu.solve(bs - As @ x)
    if not np.all(np.isfinite(x)):
        raise SolverError("interface solve produced non-finite coefficients")
    lam = 0.0
    if gauge:
        x, lam = x[:-1], float(x[-1])
    res = As[:n, :n] @ x - bs[:n] if gauge else As @ x - bs
    if np.linalg.norm(res) > 1e-6 * max(np.linalg.norm(bs[:n]), 1.0):
        log.warning("interface residual %.3e is large", np.linalg.norm(res))
    return x, lam


def solve_mrcm(
    grid: FineGrid,
    decomposition: Decomposition,
    skeleton: Skeleton,
    field: PermeabilityField,
    bspec: BoundarySpec,
    preset: MethodPreset,
    scheme: str = PBS,
    *,
    mobility=None,
    cutoffs: ClassifierConfig | None = None,
    classification: InterfaceClassification | None = None,
    spaces: InterfaceSpaces | None = None,
    threads: int = 1,
) -> MultiscaleSolution:
    """Classify, build spaces, solve local problems, solve the interface system, superpose."""
    kappa = _kappa(field, mobility)
    bspec.check_compatible()
    if cutoffs is None:
        cutoffs = ClassifierConfig(alpha_small=preset.alpha_small, alpha_large=preset.alpha_large)
    if classification is None:
        classification = classify(field, skeleton, cutoffs)
    if spaces is None:
        spaces = assemble_spaces(classification, skeleton, scheme, **preset.space_switches)
    alpha = preset.alpha_map(classification)
    responses = all_basis_responses(decomposition, skeleton, kappa, bspec, alpha, spaces, threads)
    system = assemble_global(responses, spaces, skeleton)
    x, lam = solve_global(system, gauge=not bspec.has_pressure and skeleton.M > 0)
    return _superpose(grid, decomposition, skeleton, kappa, bspec, spaces, responses, x, lam)


def _superpose(grid, dec, skeleton, kappa, bspec, spaces, responses, x, lam) -> MultiscaleSolution:
    ny, nx = grid.shape
    p = np.zeros(grid.shape)
    uxm, uxp = np.zeros((ny, nx + 1)), np.zeros((ny, nx + 1))
    uym, uyp = np.zeros((ny + 1, nx)), np.zeros((ny + 1, nx))
    ni = spaces.size
    for n, br in enumerate(responses):
        loc = br.solution(x[br.cols] if len(br.cols) else None, spaces, level=x[ni + n])
        js, is_ = br.solver.slices
        p[js, is_] = loc.pressure
        i0, i1 = is_.start, is_.stop
        j0, j1 = js.start, js.stop
        uxp[js, i0:i1] = loc.ux[:, :-1]
        uxm[js, i0 + 1:i1 + 1] = loc.ux[:, 1:]
        uyp[j0:j1, is_] = loc.uy[:-1, :]
        uym[j0 + 1:j1 + 1, is_] = loc.uy[1:, :]
    uxm[:, 0] = uxp[:, 0]
    uxp[:, -1] = uxm[:, -1]
    uym[0, :] = uyp[0, :]
    uyp[-1, :] = uym[-1, :]
    shift = 0.0
    if not bspec.has_pressure:
        p, shift = _zero_mean(p)
    off_u, off_p = dof_offsets(spaces)
    U = tuple(x[off_u[k]:off_u[k] + spaces.flux[k].dim] for k in range(len(spaces)))
    P = tuple(x[off_p[k]:off_p[k] + spaces.pressure[k].dim] - shift * spaces.pressure[k].constant_coefficients()
              for k in range(len(spaces)))
    return MultiscaleSolution(
        grid, p, FaceFlux(uxm, uym), FaceFlux(uxp, uyp), kappa, bspec, dec, skeleton,
        InterfaceSolution(U, P, shift), spaces, responses, pressure_shift=shift,
    )


def _rel(num: float, den: float, what: str) -> float:
    if den == 0:
        raise ContractViolation(f"reference {what} has zero norm")
    return float(num / den)


def relative_l2_pressure(approx: np.ndarray, ref: np.ndarray) -> float:
    return _rel(np.sqrt(np.sum((approx - ref) ** 2)), np.sqrt(np.sum(ref**2)), "pressure")


def relative_l2_flux(approx: tuple, ref: tuple) -> float:
    ax, ay = approx
    rx, ry = ref
    num = np.sqrt(np.sum((ax - rx) ** 2 + (ay - ry) ** 2))
    return _rel(num, np.sqrt(np.sum(rx**2 + ry**2)), "flux")


def relative_l1_saturation(approx: np.ndarray, ref: np.ndarray) -> float:
    return _rel(np.sum(np.abs(approx - ref)), np.sum(np.abs(ref)), "saturation")


def error_norms(approx, reference, approx_flux: FaceFlux | None = None, saturation=None) -> dict:
    """Relative errors on uniform cells (the common cell volume cancels).

    ``approx_flux`` replaces the raw two-valued multiscale flux, e.g. with a
    downscaled field; ``saturation=(s_approx, s_ref)`` adds the L1 error.
    """
    if approx.grid != reference.grid:
        raise ContractViolation("solutions live on different grids")
    va = approx_flux.cell_velocity() if approx_flux is not None else approx.cell_velocity()
    out = {
        "pressure": relative_l2_pressure(approx.pressure, reference.pressure),
        "flux": relative_l2_flux(va, reference.cell_velocity()),
    }
    if saturation is not None:
        out["saturation"] = relative_l1_saturation(*saturation)
    return out
