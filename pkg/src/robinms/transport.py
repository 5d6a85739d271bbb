"""Sequential two-phase flow: elliptic updates, explicit upwind transport, PVI clock.

Porosity is one, so the pore volume is the domain area and a cell's pore
volume is its area.  Between elliptic updates at ``t_n`` the transport
substeps use the velocity extrapolated linearly from ``u^{n-1}`` and ``u^n``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .boundary import BoundarySpec
from .downscale import PatchConfig, stitch
from .errors import ConfigurationError, TransportError
from .field import FluidModel, PermeabilityField
from .grid import Decomposition, FineGrid, Skeleton
from .mrcm import FaceFlux, MethodPreset, fine_reference_solve, relative_l1_saturation, solve_mrcm
from .spaces import PBS, ClassifierConfig, assemble_spaces, classify

log = logging.getLogger(__name__)

BOUND_TOL = 1e-10

EllipticSolver = Callable[[np.ndarray], FaceFlux]


@dataclass(frozen=True)
class SplittingConfig:
    C: int = 20
    cfl: float = 0.9

    def __post_init__(self):
        if int(self.C) != self.C or self.C < 1:
            raise ConfigurationError("C must be a positive integer")
        if not (0.0 < self.cfl <= 1.0):
            raise ConfigurationError("cfl must lie in (0, 1]")


@dataclass
class SaturationState:
    s: np.ndarray
    t: float = 0.0
    pvi: float = 0.0
    s_inflow: float = 1.0

    def __post_init__(self):
        self.s = np.array(self.s, dtype=float)
        if np.any(self.s < -1e-12) or np.any(self.s > 1.0 + 1e-12):
            raise ConfigurationError("saturation outside [0, 1]")
        if not (0.0 <= self.s_inflow <= 1.0):
            raise ConfigurationError("inflow saturation outside [0, 1]")


def pore_volume(grid: FineGrid) -> float:
    return grid.Lx * grid.Ly


def _face_outflows(flux: FaceFlux, grid: FineGrid):
    """Integrated outward fluxes of the four boundary sides."""
    return {
        "left": -flux.ux[:, 0] * grid.hy,
        "right": flux.ux[:, -1] * grid.hy,
        "bottom": -flux.uy[0, :] * grid.hx,
        "top": flux.uy[-1, :] * grid.hx,
    }


def _outgoing(fluxes: Sequence[FaceFlux], grid: FineGrid, q: np.ndarray) -> np.ndarray:
    """Per-cell total outgoing flux, taking the facewise maximum over ``fluxes``."""
    out = np.zeros(grid.shape)
    fx = np.max([u.ux for u in fluxes], axis=0) * grid.hy, np.min([u.ux for u in fluxes], axis=0) * grid.hy
    fy = np.max([u.uy for u in fluxes], axis=0) * grid.hx, np.min([u.uy for u in fluxes], axis=0) * grid.hx
    out += np.maximum(fx[0][:, 1:], 0.0) + np.maximum(-fx[1][:, :-1], 0.0)
    out += np.maximum(fy[0][1:, :], 0.0) + np.maximum(-fy[1][:-1, :], 0.0)
    out += np.maximum(-q, 0.0) * grid.cell_volume
    return out


def cfl_timestep(fluxes, grid: FineGrid, fluid: FluidModel, cfl: float = 0.9, q=None) -> float:
    """``cfl * min(vol / (max|f'| * outgoing))``; ``inf`` without any outflow.

    ``fluxes`` is one field or a sequence whose facewise envelope is used.
    """
    if isinstance(fluxes, FaceFlux):
        fluxes = [fluxes]
    q = np.zeros(grid.shape) if q is None else q
    out = _outgoing(fluxes, grid, q)
    peak = float(out.max())
    if peak <= 0.0:
        return float("inf")
    return cfl * grid.cell_volume / (fluid.max_dfdS * peak)


def inflow_rate(flux: FaceFlux, grid: FineGrid, q: np.ndarray) -> float:
    """Volume per unit time entering through inflow faces and injection cells."""
    rate = sum(float(np.sum(np.maximum(-o, 0.0))) for o in _face_outflows(flux, grid).values())
    return rate + float(np.sum(np.maximum(q, 0.0))) * grid.cell_volume


def upwind_step(
    s: np.ndarray,
    flux: FaceFlux,
    dt: float,
    grid: FineGrid,
    q: np.ndarray,
    fluid: FluidModel,
    s_inflow: float = 1.0,
) -> tuple[np.ndarray, float, float]:
    """One explicit upwind step; returns ``(s', injected water, produced water)``."""
    f = fluid.fractional_flow(s)
    f_in = fluid.fractional_flow(s_inflow)
    vol = grid.cell_volume
    Fx = flux.ux[:, 1:-1] * grid.hy
    Fy = flux.uy[1:-1, :] * grid.hx
    wx = Fx * np.where(Fx > 0, f[:, :-1], f[:, 1:])
    wy = Fy * np.where(Fy > 0, f[:-1, :], f[1:, :])
    div = np.zeros(grid.shape)
    div[:, :-1] += wx
    div[:, 1:] -= wx
    div[:-1, :] += wy
    div[1:, :] -= wy
    injected = produced = 0.0
    cells = {
        "left": (slice(None), 0),
        "right": (slice(None), -1),
        "bottom": (0, slice(None)),
        "top": (-1, slice(None)),
    }
    for side, o in _face_outflows(flux, grid).items():
        fc = f[cells[side]]
        w = np.where(o < 0, o * f_in, o * fc)
        div[cells[side]] += w
        injected -= float(np.sum(np.minimum(w, 0.0)))
        produced += float(np.sum(np.maximum(w, 0.0)))
    src = np.where(q > 0, q * f_in, q * f) * vol
    div -= src
    injected += float(np.sum(np.maximum(src, 0.0)))
    produced -= float(np.sum(np.minimum(src, 0.0)))
    s_new = s - (dt / vol) * div
    lo, hi = float(s_new.min()), float(s_new.max())
    if lo < -BOUND_TOL or hi > 1.0 + BOUND_TOL:
        raise TransportError(f"upwind step left [0, 1] (min {lo:.3e}, max {hi:.3e}): CFL violated")
    return np.clip(s_new, 0.0, 1.0), injected * dt, produced * dt


def extrapolate_velocity(
    u_prev: FaceFlux | None,
    u_cur: FaceFlux,
    t: float,
    t_prev: float | None,
    t_cur: float,
    t_next: float | None = None,
) -> FaceFlux:
    """Linear extrapolation ``u^n + (t - t_n) (u^n - u^{n-1}) / (t_n - t_{n-1})``.

    In the first elliptic interval (no ``u_prev``) the current field is used.
    """
    if t < t_cur or (t_next is not None and t > t_next * (1 + 1e-12) + 1e-300):
        raise TransportError(f"extrapolation time {t} outside ({t_cur}, {t_next}]")
    if u_prev is None or t == t_cur:
        return u_cur
    a = (t - t_cur) / (t_cur - t_prev)
    return FaceFlux(u_cur.ux + a * (u_cur.ux - u_prev.ux), u_cur.uy + a * (u_cur.uy - u_prev.uy))


def pvi_clock(pvi: float, flux: FaceFlux, dt: float, grid: FineGrid, q=None) -> float:
    """Advance the pore-volumes-injected clock over a step with fixed velocity."""
    q = np.zeros(grid.shape) if q is None else q
    return pvi + dt * inflow_rate(flux, grid, q) / pore_volume(grid)


@dataclass(frozen=True, eq=False)
class TwoPhaseProblem:
    grid: FineGrid
    field: PermeabilityField
    bspec: BoundarySpec
    fluid: FluidModel = FluidModel()
    s0: float = 0.0
    s_inflow: float = 1.0


@dataclass(eq=False)
class TwoPhaseResult:
    snapshots: dict  # checkpoint PVI -> saturation
    times: dict  # checkpoint PVI -> physical time
    n_elliptic: int
    n_transport: int
    initial_mass: float
    final_mass: float
    injected: float
    produced: float
    s_min: float
    s_max: float
    max_conservation_residual: float  # relative to the largest face flux
    final_state: SaturationState = field(repr=False, default=None)

    @property
    def mass_balance_error(self) -> float:
        gap = self.final_mass - self.initial_mass - (self.injected - self.produced)
        return abs(gap) / max(self.injected, self.produced, 1e-300)


def conservation_ratio(flux: FaceFlux, grid: FineGrid, q: np.ndarray) -> float:
    """Largest cell imbalance over the largest integrated face flux."""
    scale = max(float(np.abs(flux.ux).max()) * grid.hy, float(np.abs(flux.uy).max()) * grid.hx, 1e-300)
    return float(np.abs(flux.divergence_residual(grid, q)).max()) / scale


def run_two_phase(
    problem: TwoPhaseProblem,
    elliptic: EllipticSolver,
    checkpoints: Sequence[float],
    splitting: SplittingConfig = SplittingConfig(),
    max_elliptic: int = 1_000_000,
) -> TwoPhaseResult:
    """Operator splitting up to the last PVI checkpoint, with snapshots at each one."""
    g, fluid = problem.grid, problem.fluid
    q = problem.bspec.q
    marks = sorted(set(float(c) for c in checkpoints))
    if not marks or marks[0] <= 0:
        raise ConfigurationError("PVI checkpoints must be positive")
    Vp = pore_volume(g)
    state = SaturationState(np.broadcast_to(problem.s0, g.shape), s_inflow=problem.s_inflow)
    vol = g.cell_volume
    m0 = float(state.s.sum() * vol)
    injected = produced = 0.0
    snaps, times = {}, {}
    smin, smax, worst = float(state.s.min()), float(state.s.max()), 0.0
    u_prev = t_prev = None
    n_ell = n_tr = 0
    nxt = 0
    while nxt < len(marks):
        if n_ell >= max_elliptic:
            raise TransportError("elliptic step budget exhausted before the last checkpoint")
        t_n = state.t
        u_cur = elliptic(fluid.total_mobility(state.s))
        n_ell += 1
        worst = max(worst, conservation_ratio(u_cur, g, q))
        dts = cfl_timestep(u_cur, g, fluid, splitting.cfl, q)
        if not np.isfinite(dts):
            raise TransportError("no flow: the PVI clock cannot advance")
        if u_prev is not None:
            # envelope of the velocities met over the elliptic step
            u_end = extrapolate_velocity(u_prev, u_cur, t_n + splitting.C * dts, t_prev, t_n)
            dts = min(dts, cfl_timestep([u_cur, u_end], g, fluid, splitting.cfl, q))
        t_end = t_n + splitting.C * dts
        for _ in range(splitting.C):
            u = extrapolate_velocity(u_prev, u_cur, state.t, t_prev, t_n, t_end)
            rate = inflow_rate(u, g, q)
            dt = min(dts, t_end - state.t)
            hit = False
            if rate > 0 and state.pvi + dt * rate / Vp >= marks[nxt]:
                dt = (marks[nxt] - state.pvi) * Vp / rate
                hit = True
            state.s, inj, prod = upwind_step(state.s, u, dt, g, q, fluid, state.s_inflow)
            n_tr += 1
            injected += inj
            produced += prod
            smin, smax = min(smin, float(state.s.min())), max(smax, float(state.s.max()))
            state.t += dt
            state.pvi = marks[nxt] if hit else state.pvi + dt * rate / Vp
            if hit:
                snaps[marks[nxt]] = state.s.copy()
                times[marks[nxt]] = state.t
                nxt += 1
                if nxt == len(marks):
                    break
            if state.t >= t_end:
                break
        u_prev, t_prev = u_cur, t_n
        log.debug("elliptic step %d: t=%.4g pvi=%.4g", n_ell, state.t, state.pvi)
    return TwoPhaseResult(
        snaps, times, n_ell, n_tr, m0, float(state.s.sum() * vol), injected, produced,
        smin, smax, worst, state,
    )


def fine_elliptic(problem: TwoPhaseProblem) -> EllipticSolver:
    def solve(mobility: np.ndarray) -> FaceFlux:
        return fine_reference_solve(problem.grid, problem.field, problem.bspec, mobility=mobility).flux_minus

    return solve


def multiscale_elliptic(
    problem: TwoPhaseProblem,
    decomposition: Decomposition,
    skeleton: Skeleton,
    preset: MethodPreset,
    scheme: str = PBS,
    patch: PatchConfig = PatchConfig(),
    cutoffs: ClassifierConfig | None = None,
    threads: int = 1,
) -> EllipticSolver:
    """MRCM solve plus downscaling; features and spaces come from the absolute permeability."""
    if cutoffs is None:
        cutoffs = ClassifierConfig(alpha_small=preset.alpha_small, alpha_large=preset.alpha_large)
    classification = classify(problem.field, skeleton, cutoffs)
    spaces = assemble_spaces(classification, skeleton, scheme, **preset.space_switches)

    def solve(mobility: np.ndarray) -> FaceFlux:
        ms = solve_mrcm(
            problem.grid, decomposition, skeleton, problem.field, problem.bspec, preset, scheme,
            mobility=mobility, cutoffs=cutoffs, classification=classification, spaces=spaces,
            threads=threads,
        )
        return stitch(ms, patch, threads)

    return solve


def saturation_errors(result: TwoPhaseResult, reference: TwoPhaseResult) -> dict:
    """Relative L1 saturation error at every checkpoint both runs reached."""
    common = sorted(set(result.snapshots) & set(reference.snapshots))
    return {c: relative_l1_saturation(result.snapshots[c], reference.snapshots[c]) for c in common}
