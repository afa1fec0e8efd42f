"""Exception hierarchy shared by all modules."""


class GibbsLatError(Exception):
    """Base class for all package errors."""


class DomainError(GibbsLatError, ValueError):
    """A point lies outside the support it is required to be in."""


class DegenerateSiteError(GibbsLatError):
    """The conditional law at a site has no mass under the quadrature."""


class InsufficientDataError(GibbsLatError):
    """No usable site survives the border correction."""

    def __init__(self, message, n_sites=0):
        super().__init__(message)
        self.n_sites = n_sites


class InfeasibleThetaError(GibbsLatError):
    """Observed data violate the hard-core constraint of the model."""


class IdentifiabilityError(GibbsLatError):
    """The estimating equations do not determine the parameter."""


class ConfigError(GibbsLatError, ValueError):
    """Invalid configuration or simulation plan."""


class DataError(GibbsLatError, ValueError):
    """Malformed input data file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
