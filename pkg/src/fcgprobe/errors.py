"""Exception types shared across the package."""


class FcgError(Exception):
    """Base class for all package errors."""


class ParseError(FcgError):
    pass


class ValidationError(FcgError):
    pass


class DegenerateGraph(FcgError):
    pass


class NonConvergent(FcgError):
    pass


class AlphaTooLarge(FcgError):
    pass


class DimensionMismatch(FcgError):
    pass


class DegenerateData(FcgError):
    pass


class VersionMismatch(FcgError):
    pass


class NoValidOp(FcgError):
    pass


class InvalidSequence(FcgError):
    pass


class RepairFailed(FcgError):
    pass


class ConfigError(FcgError):
    pass
