"""Multiscale Robin coupled method with physics-based interface spaces."""
from .boundary import BoundarySpec, quarter_five_spot, slab_flux, slab_pressure
from .downscale import PatchConfig, stitch
from .errors import (
    ConfigurationError,
    ContractViolation,
    DataError,
    DownscalingError,
    RobinMSError,
    SolverError,
    TransportError,
)
from .field import FieldSpec, FluidModel, PermeabilityField, Segment, generate_field, load_field, save_field
from .grid import build_decomposition, build_grid
from .mrcm import MethodPreset, error_norms, fine_reference_solve, solve_mrcm
from .spaces import FULL, PBS, POL, ClassifierConfig, assemble_spaces, classify
from .transport import SplittingConfig, TwoPhaseProblem, run_two_phase

__version__ = "0.1.0"
