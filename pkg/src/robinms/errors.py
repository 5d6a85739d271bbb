"""Exception hierarchy shared by all modules."""


class RobinMSError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(RobinMSError, ValueError):
    """Invalid grid, decomposition, field specification or scenario config."""


class DataError(RobinMSError, ValueError):
    """Malformed or inconsistent input data (field files, sizes, values)."""


class ContractViolation(RobinMSError, ValueError):
    """An operation was called outside its documented preconditions."""


class SolverError(RobinMSError, RuntimeError):
    """A linear system could not be solved (singular, incompatible, non-finite)."""


class DownscalingError(RobinMSError, RuntimeError):
    """Patch Neumann data could not be made compatible."""


class TransportError(RobinMSError, RuntimeError):
    """A saturation step left the admissible range."""
