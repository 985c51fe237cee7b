"""Exception hierarchy shared by all modules."""


class OscSpectraError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(OscSpectraError, ValueError):
    pass


class DomainError(OscSpectraError, ValueError):
    pass


class AccuracyError(OscSpectraError):
    """A quadrature or contour rule failed its refinement check."""

    def __init__(self, message, coarse=None, fine=None, where=None):
        super().__init__(message)
        self.coarse = coarse
        self.fine = fine
        self.where = where


class AssemblyError(AccuracyError):
    pass


class ConvergenceError(OscSpectraError):
    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class PoleError(OscSpectraError):
    """Shift lies on (or numerically at) an eigenvalue."""

    def __init__(self, message, z=None, condition=None):
        super().__init__(message)
        self.z = z
        self.condition = condition


class ContourError(PoleError):
    pass


class NotInVError(OscSpectraError):
    """The norm profile never drops below the localization threshold."""
