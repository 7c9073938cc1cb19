"""Exception hierarchy."""


class PointVortexError(Exception):
    """Base class for all package errors."""


class GeometryError(PointVortexError, ValueError):
    pass


class CoincidentPointsError(GeometryError):
    """Two points are closer than the coincidence threshold."""

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = indices


class OutsideDomainError(GeometryError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class UnsupportedDomainError(GeometryError):
    """Operation not defined for this domain variant (e.g. Robin on the plane)."""


class OutsideBandError(GeometryError):
    """Point is farther from the boundary than the projection band width."""


class InvalidMapError(GeometryError):
    """Conformal map fails the injectivity or band checks."""


class SettingsError(PointVortexError, ValueError):
    pass


class SizeError(PointVortexError, ValueError):
    pass


class EmptyTrajectoryError(PointVortexError, ValueError):
    pass


class InsufficientSamplesError(PointVortexError, ValueError):
    pass


class WrongDomainError(PointVortexError, ValueError):
    pass


class ConfigError(PointVortexError, ValueError):
    """Schema or semantic error in a run configuration.

    ``path`` is a JSON-path-like location such as ``$.vortices[1].intensity``.
    """

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownScenarioError(PointVortexError, KeyError):
    def __init__(self, name, available):
        self.name = name
        self.available = tuple(available)
        super().__init__(name)

    def __str__(self):
        return f"unknown scenario {self.name!r}; available: {', '.join(self.available)}"
