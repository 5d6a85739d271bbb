"""Interface classification and interface spaces.

Every basis function is stored as one value per fine edge of its interface,
so a space on an interface with ``m`` edges is an ``(m, N)`` matrix.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ContractViolation
from .field import PermeabilityField
from .grid import Interface, Skeleton

POL, PBS, FULL = "POL", "PBS", "FULL"
SCHEMES = (POL, PBS, FULL)

Run = tuple[int, int]  # inclusive edge range [b, c]


@dataclass(frozen=True)
class ClassifierConfig:
    zeta_max: float = 1.0
    zeta_min: float = 1.0
    alpha_small: float = 1e-2
    alpha_large: float = 1e2

    def __post_init__(self):
        if not (self.zeta_min > 0 and self.zeta_max > 0 and self.zeta_min <= self.zeta_max):
            raise ConfigurationError("cutoffs must satisfy 0 < zeta_min <= zeta_max")
        if not (0 < self.alpha_small < self.alpha_large):
            raise ConfigurationError("need 0 < alpha_small < alpha_large")


@dataclass(frozen=True, eq=False)
class InterfaceLabels:
    fracture: np.ndarray  # bool per edge
    barrier: np.ndarray  # bool per edge
    alpha: np.ndarray  # adaptive alpha per edge
    fracture_runs: tuple[Run, ...]
    barrier_runs: tuple[Run, ...]

    @property
    def n_frac(self) -> int:
        return len(self.fracture_runs)

    @property
    def n_barrier(self) -> int:
        return len(self.barrier_runs)

    @property
    def is_frac(self) -> bool:
        return bool(self.fracture.any())

    @property
    def is_barrier(self) -> bool:
        return bool(self.barrier.any())


@dataclass(frozen=True, eq=False)
class InterfaceClassification:
    labels: tuple[InterfaceLabels, ...]

    @property
    def gamma_frac(self) -> frozenset[int]:
        return frozenset(k for k, lab in enumerate(self.labels) if lab.is_frac)

    @property
    def gamma_barrier(self) -> frozenset[int]:
        return frozenset(k for k, lab in enumerate(self.labels) if lab.is_barrier)


@dataclass(frozen=True, eq=False)
class InterfaceSpace:
    basis: np.ndarray  # (m, N)
    kind: str

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def m(self) -> int:
        return self.basis.shape[0]

    def constant_coefficients(self) -> np.ndarray:
        """Coefficients representing the constant function 1 (least squares)."""
        c, *_ = np.linalg.lstsq(self.basis, np.ones(self.m), rcond=None)
        return c


def extract_runs(mask) -> tuple[Run, ...]:
    """Maximal runs of True values as inclusive index pairs, in order."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return ()
    padded = np.concatenate(([False], m, [False])).astype(np.int8)
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    stops = np.flatnonzero(d == -1) - 1
    return tuple((int(b), int(c)) for b, c in zip(starts, stops))


def classify(field: PermeabilityField, skeleton: Skeleton, cfg: ClassifierConfig) -> InterfaceClassification:
    K = field.values
    labels = []
    for itf in skeleton.interfaces:
        km = K[itf.cells(-1)]
        kp = K[itf.cells(+1)]
        frac = np.maximum(km, kp) > cfg.zeta_max
        barr = np.minimum(km, kp) < cfg.zeta_min
        alpha = np.where(frac, cfg.alpha_small, cfg.alpha_large)
        labels.append(InterfaceLabels(frac, barr, alpha, extract_runs(frac), extract_runs(barr)))
    return InterfaceClassification(tuple(labels))


def _size(interface) -> int:
    return interface.m if isinstance(interface, Interface) else int(interface)


def build_polynomial_space(interface, degree: int = 1) -> InterfaceSpace:
    """Monomials ``1, x`` sampled at edge midpoints of the unit interface coordinate."""
    if degree not in (0, 1):
        raise ContractViolation(f"unsupported polynomial degree {degree}")
    m = _size(interface)
    xhat = (np.arange(m) + 0.5) / m
    cols = [np.ones(m)] + ([xhat] if degree == 1 else [])
    if m < len(cols):
        cols = cols[:m]
    return InterfaceSpace(np.column_stack(cols), f"polynomial-{degree}")


def build_full_space(interface) -> InterfaceSpace:
    """One indicator per fine edge: the whole of the piecewise-constant space."""
    return InterfaceSpace(np.eye(_size(interface)), "full")


def _check_runs(runs, m):
    if not runs:
        raise ContractViolation("physics-based space needs at least one run")
    prev = -1
    for b, c in runs:
        if not (0 <= b <= c < m) or b <= prev:
            raise ContractViolation(f"runs {runs} are not sorted, disjoint and inside [0, {m})")
        prev = c + 1  # maximal runs are separated by at least one edge


def build_pressure_pbs(interface, runs) -> InterfaceSpace:
    """Ramp / plateau pressure basis: two end ramps plus one plateau per run.

    Coordinates are in edge units, the interface spans ``[0, m]`` and run
    ``(b, c)`` occupies ``[b, c + 1]``.  Between consecutive runs the two
    plateau functions cross over linearly; end ramps over empty gaps vanish
    and are dropped.
    """
    m = _size(interface)
    runs = tuple(runs)
    _check_runs(runs, m)
    t = np.arange(m) + 0.5
    starts = [b for b, _ in runs]
    ends = [c + 1 for _, c in runs]
    cols = []
    if starts[0] > 0:
        cols.append(np.where(t < starts[0], (starts[0] - t) / starts[0], 0.0))
    for r in range(len(runs)):
        lo = ends[r - 1] if r > 0 else 0
        hi = starts[r + 1] if r + 1 < len(runs) else m
        psi = np.zeros(m)
        psi[(t > starts[r]) & (t < ends[r])] = 1.0
        if starts[r] > lo:
            up = (t > lo) & (t < starts[r])
            psi[up] = (t[up] - lo) / (starts[r] - lo)
        if hi > ends[r]:
            down = (t > ends[r]) & (t < hi)
            psi[down] = (hi - t[down]) / (hi - ends[r])
        cols.append(psi)
    if ends[-1] < m:
        cols.append(np.where(t > ends[-1], (t - ends[-1]) / (m - ends[-1]), 0.0))
    return InterfaceSpace(np.column_stack(cols), "physics-pressure")


def build_flux_pbs(interface, runs) -> InterfaceSpace:
    """Indicators of every barrier run and of every background gap around them."""
    m = _size(interface)
    runs = tuple(runs)
    _check_runs(runs, m)
    cuts = [0]
    for b, c in runs:
        cuts += [b, c + 1]
    cuts.append(m)
    cols = []
    idx = np.arange(m)
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            cols.append(((idx >= lo) & (idx < hi)).astype(float))
    return InterfaceSpace(np.column_stack(cols), "physics-flux")


@dataclass(frozen=True, eq=False)
class InterfaceSpaces:
    flux: tuple[InterfaceSpace, ...]
    pressure: tuple[InterfaceSpace, ...]

    def __len__(self):
        return len(self.flux)

    def __getitem__(self, k) -> tuple[InterfaceSpace, InterfaceSpace]:
        return self.flux[k], self.pressure[k]

    @property
    def size(self) -> int:
        return sum(u.dim + p.dim for u, p in zip(self.flux, self.pressure))


def assemble_spaces(
    classification: InterfaceClassification,
    skeleton: Skeleton,
    scheme: str = PBS,
    *,
    pressure_pbs: bool = True,
    flux_pbs: bool = True,
) -> InterfaceSpaces:
    """Select the (flux, pressure) space on every interface.

    ``PBS`` puts the ramp/plateau pressure space on fracture-crossed interfaces
    and the indicator flux space on barrier-crossed ones, linear elsewhere.
    ``pressure_pbs``/``flux_pbs`` switch either substitution off (used by the
    single-space MMMFEM and MHM presets).  ``POL`` is linear everywhere and
    ``FULL`` uses one indicator per edge for both spaces.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown interface scheme {scheme!r}")
    flux, pres = [], []
    for itf, lab in zip(skeleton.interfaces, classification.labels):
        if scheme == FULL:
            flux.append(build_full_space(itf))
            pres.append(build_full_space(itf))
            continue
        use_p = scheme == PBS and pressure_pbs and lab.is_frac
        use_u = scheme == PBS and flux_pbs and lab.is_barrier
        pres.append(build_pressure_pbs(itf, lab.fracture_runs) if use_p else build_polynomial_space(itf, 1))
        flux.append(build_flux_pbs(itf, lab.barrier_runs) if use_u else build_polynomial_space(itf, 1))
    return InterfaceSpaces(tuple(flux), tuple(pres))


def dump_spaces_csv(spaces: InterfaceSpaces, path) -> None:
    """Debug dump: one row per (interface, space, edge) with all basis values."""
    lines = ["interface,space,kind,edge,values"]
    for k, (u, p) in enumerate(zip(spaces.flux, spaces.pressure)):
        for name, sp in (("flux", u), ("pressure", p)):
            for e in range(sp.m):
                vals = ";".join(repr(float(v)) for v in sp.basis[e])
                lines.append(f"{k},{name},{sp.kind},{e},{vals}")
    Path(path).write_text("\n".join(lines) + "\n")
