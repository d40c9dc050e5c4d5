"""Exception hierarchy."""


class RadlocError(Exception):
    """Base class for all package errors."""


class ContractError(RadlocError, ValueError):
    """A precondition on arguments was violated (dimension, distinctness, ...)."""


class DegenerateArrayError(ContractError):
    """Sensors lie on an (N-1)-dimensional hyperplane."""


class SingularityError(RadlocError, ValueError):
    """Evaluation at (or within the guard radius of) a sensor position."""


class DegenerateMeasurementError(RadlocError, ValueError):
    """All counts are zero, so the intensity estimate is undefined."""


class ConfigurationError(RadlocError, ValueError):
    """Model or experiment parameters out of the supported range."""
