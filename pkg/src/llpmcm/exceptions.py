class LLPError(Exception):
    """Base class for computation failures raised by this package."""


class ContaminationError(LLPError, ValueError):
    """Raised when kappa+ + kappa- leaves no usable signal (1 - k+ - k- too small)."""


class DegeneratePairsError(LLPError):
    """Raised when every bag pair has a label-proportion gap below the floor."""


class ConfigError(LLPError):
    """Invalid or missing user configuration (maps to CLI exit code 2)."""
