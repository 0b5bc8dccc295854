"""Exception types shared across the pipeline."""


class PillarGuardError(Exception):
    """Base class for all domain errors raised by this package."""


class LengthError(PillarGuardError):
    """Binary payload length is not a whole number of records."""


class SchemaError(PillarGuardError):
    """Malformed scene/detection document; `path` locates the offending field."""

    def __init__(self, path, message=""):
        self.path = path
        super().__init__(f"{path}: {message}" if message else str(path))


class CalibError(PillarGuardError):
    """Calibration rotation failed the orthonormality check."""


class DomainError(PillarGuardError):
    """Input lies outside the operation's domain (e.g. point outside pillar)."""


class DataError(PillarGuardError):
    """Dataset cannot support the requested operation (e.g. single-class data)."""


class EmptyPillarError(PillarGuardError):
    """Pillar has no valid points; the classifier needs at least one."""


class NumericsError(PillarGuardError):
    """Non-finite value encountered in a numeric computation."""


class SizeError(PillarGuardError):
    """Collection too small for the requested neighborhood size."""


class GeometryError(PillarGuardError):
    """Degenerate geometric configuration (e.g. sensor inside a footprint)."""


class EmptyLibraryError(PillarGuardError):
    """No donor object qualified for the transplant library."""


class PlacementError(PillarGuardError):
    """Scene generator exhausted its placement attempts."""


class EmptySetError(PillarGuardError):
    """Point-set distance requires non-empty sets."""
