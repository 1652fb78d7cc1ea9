"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class MomentDomainError(DomainError):
    """The requested moment order is outside the family's moment domain."""


class GeometryError(ValueError):
    """Invalid pixel grid, mesh or window parameters."""


class EstimationError(ValueError):
    """Masses or curves cannot be estimated from the given map."""


class SimulationError(RuntimeError):
    """Gaussian field synthesis failed."""


class FormatError(ValueError):
    """A map, curve or result file is malformed."""


class FitError(ValueError):
    """A regression problem is degenerate or starts outside its domain."""
