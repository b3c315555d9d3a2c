"""Exception hierarchy shared by all modules.

Each error carries the exit code the command-line front end reports for it.
"""


class MilnorError(Exception):
    exit_code = 1


class GermParseError(MilnorError, ValueError):
    exit_code = 2


class CatalogError(MilnorError, ValueError):
    exit_code = 2


class DimensionMismatch(MilnorError, ValueError):
    exit_code = 2


class DegenerateCritical(MilnorError):
    """A critical point has a Hessian eigenvalue within the degeneracy tolerance of 0."""

    exit_code = 3

    def __init__(self, message, location=None, eigenvalues=None):
        super().__init__(message)
        self.location = location
        self.eigenvalues = eigenvalues


class DecryptionError(MilnorError):
    exit_code = 4


class DomainError(MilnorError, ValueError):
    exit_code = 5


class NoConvergence(MilnorError):
    exit_code = 5


class PoleError(DomainError):
    pass


class PoleProximity(DomainError):
    pass


class NotIsolated(MilnorError):
    exit_code = 6


class ProtocolViolation(MilnorError):
    exit_code = 7


class UnknownMessage(MilnorError, KeyError):
    exit_code = 8

    def __str__(self):
        return Exception.__str__(self)
