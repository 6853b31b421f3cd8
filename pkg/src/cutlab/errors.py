"""Exception hierarchy.

The CLI maps these onto exit codes: ``DomainError`` and its subclasses are
invalid input (1), ``NumericalError`` subclasses are numerical failures (2)
and ``InvariantViolation`` is raised by ``verify-all`` (3).
"""


class CutlabError(Exception):
    exit_code = 2


class DomainError(CutlabError, ValueError):
    """Input outside the domain of an operation (bad point, bad parameter)."""

    exit_code = 1


class ConfigError(DomainError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class PreconditionError(DomainError):
    """A hypothesis of a check does not hold (e.g. q lies on the cut locus)."""


class NumericalError(CutlabError):
    exit_code = 2

    def __init__(self, message, module=None, sample=None):
        super().__init__(message)
        self.module = module
        self.sample = sample


class IntegrationError(NumericalError):
    def __init__(self, message, t):
        super().__init__(message, module="geodesic_engine", sample=t)
        self.t = t


class NoConnectionError(NumericalError):
    pass


class LiftObstruction(NumericalError):
    def __init__(self, message, index):
        super().__init__(message, module="connections", sample=index)
        self.index = index


class InconsistencyError(NumericalError):
    pass


class InvariantViolation(CutlabError):
    exit_code = 3
