"""Exception hierarchy shared by all soler3d modules."""


class SolerError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(SolerError, ValueError):
    pass


class BracketFailure(SolerError):
    """A bisection bracket does not straddle the sign change it needs."""


class DegenerateBasis(SolerError):
    pass


class EigensolverError(SolerError):
    """Dense eigensolver did not converge; carries a fingerprint of the matrix."""

    def __init__(self, message, fingerprint=None):
        super().__init__(message)
        self.fingerprint = fingerprint


class ConfigError(SolerError):
    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class ValidationFailure(SolerError):
    pass
