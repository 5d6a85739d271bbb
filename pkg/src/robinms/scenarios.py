"""Named permeability geometries and boundary presets used by the studies.

Geometries are given in unit-square coordinates so they rasterize on any
grid.  Long features are placed so they cross coarse skeleton lines of the
usual decompositions rather than running along them.
"""
from __future__ import annotations

import math

from .boundary import BoundarySpec, quarter_five_spot, slab_flux, slab_pressure
from .errors import ConfigurationError
from .field import FieldSpec, Segment
from .grid import FineGrid

# fracture network: long connected features crossing many interfaces
_FRACTURES = (
    Segment(0.07, 0.12, 0.62, 0.93, 2),
    Segment(0.38, 0.95, 0.95, 0.30, 2),
    Segment(0.55, 0.05, 0.85, 0.45, 2),
    Segment(0.12, 0.62, 0.33, 0.97, 2),
)

# barrier set: long obstructions that stop short of the inflow/outflow sides
_BARRIERS = (
    Segment(0.10, 0.28, 0.88, 0.33, 1),
    Segment(0.22, 0.64, 0.91, 0.58, 1),
    Segment(0.15, 0.92, 0.70, 0.85, 1),
)

# kinked channels plus isolated inclusions on a unit background; several
# inclusions straddle coarse interfaces of a 5x5 decomposition
_CHANNELS = (
    Segment(0.0, 0.15, 0.5, 0.27, 2),
    Segment(0.5, 0.27, 1.0, 0.12, 2),
    Segment(0.0, 0.52, 0.45, 0.44, 1),
    Segment(0.45, 0.44, 1.0, 0.57, 1),
    Segment(0.0, 0.83, 0.6, 0.74, 2),
    Segment(0.6, 0.74, 1.0, 0.86, 2),
)
_INCLUSIONS = (
    (0.17, 0.32, 0.23, 0.38),
    (0.37, 0.60, 0.43, 0.66),
    (0.57, 0.33, 0.63, 0.38),
    (0.77, 0.56, 0.83, 0.62),
    (0.17, 0.92, 0.23, 0.97),
    (0.37, 0.04, 0.43, 0.09),
    (0.77, 0.93, 0.83, 0.98),
    (0.57, 0.63, 0.63, 0.69),
    (0.37, 0.35, 0.43, 0.40),
    (0.77, 0.25, 0.83, 0.31),
)


def single_fracture(contrast: float = 1e8) -> FieldSpec:
    """One vertical fracture across the unit background."""
    return FieldSpec(1.0, contrast, 1.0, fractures=(Segment(0.31, 0.0, 0.31, 1.0, 2),))


def multiple_fractures(contrast: float = 1e8) -> FieldSpec:
    return FieldSpec(1.0, contrast, 1.0, fractures=(
        Segment(0.31, 0.0, 0.31, 1.0, 2),
        Segment(0.68, 0.0, 0.68, 1.0, 2),
    ))


def single_barrier(contrast: float = 1e8) -> FieldSpec:
    """One horizontal barrier spanning the domain."""
    return FieldSpec(1.0, 1.0, 1.0 / contrast, barriers=(Segment(0.0, 0.31, 1.0, 0.31, 2),))


def multiple_barriers(contrast: float = 1e8) -> FieldSpec:
    return FieldSpec(1.0, 1.0, 1.0 / contrast, barriers=(
        Segment(0.0, 0.31, 1.0, 0.31, 2),
        Segment(0.0, 0.68, 1.0, 0.68, 2),
    ))


def fracture_field(contrast: float = 1e8) -> FieldSpec:
    """Fracture network with K_max = contrast on a unit background."""
    return FieldSpec(1.0, contrast, 1.0, fractures=_FRACTURES)


def barrier_field(contrast: float = 1e8) -> FieldSpec:
    """Barrier set with K_min = 1/contrast on a unit background."""
    return FieldSpec(1.0, 1.0, 1.0 / contrast, barriers=_BARRIERS)


def combined_field(contrast: float = 1e8) -> FieldSpec:
    """The fracture network and the barrier set together.

    The contrast is split evenly in log scale around the unit background, so
    contrast 1e8 gives K_max = 1e4 and K_min = 1e-4.
    """
    r = math.sqrt(contrast)
    return FieldSpec(1.0, r, 1.0 / r, fractures=_FRACTURES, barriers=_BARRIERS)


def channelized_field(contrast: float = 1e6) -> FieldSpec:
    """High-permeability channels and inclusions, no low-permeability features."""
    return FieldSpec(1.0, contrast, 1.0, fractures=_CHANNELS, inclusions=_INCLUSIONS)


def channelized_barrier_field(contrast: float = 1e6) -> FieldSpec:
    """The channelized geometry with every feature turned into a barrier."""
    return FieldSpec(1.0, 1.0, 1.0 / contrast, barriers=_CHANNELS, low_inclusions=_INCLUSIONS)


FIELDS = {
    "single_fracture": single_fracture,
    "multiple_fractures": multiple_fractures,
    "single_barrier": single_barrier,
    "multiple_barriers": multiple_barriers,
    "fracture": fracture_field,
    "barrier": barrier_field,
    "combined": combined_field,
    "channelized": channelized_field,
    "channelized_barriers": channelized_barrier_field,
}


def field_spec(name: str, contrast: float) -> FieldSpec:
    try:
        return FIELDS[name](contrast)
    except KeyError:
        raise ConfigurationError(f"unknown field preset {name!r}; choose from {sorted(FIELDS)}") from None


BOUNDARIES = ("slab-flux", "slab-pressure", "quarter-five-spot")


def boundary_spec(name: str, grid: FineGrid, *, velocity: float = 1.0, dp: float = 1.0,
                  rate: float = 1.0) -> BoundarySpec:
    if name == "slab-flux":
        return slab_flux(grid, velocity)
    if name == "slab-pressure":
        return slab_pressure(grid, dp, 0.0)
    if name == "quarter-five-spot":
        return quarter_five_spot(grid, rate)
    raise ConfigurationError(f"unknown boundary preset {name!r}; choose from {BOUNDARIES}")
