"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations


class MetrizeError(Exception):
    """Base class for all errors raised by this package."""


class ExprSyntaxError(MetrizeError):
    """Malformed expression text.  ``offset`` is the byte offset of the fault."""

    def __init__(self, message: str, offset: int, source: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.source = source


class UnknownIdentifier(MetrizeError):
    def __init__(self, name: str, offset: int | None = None):
        where = "" if offset is None else f" at offset {offset}"
        super().__init__(f"unknown identifier {name!r}{where}")
        self.name = name
        self.offset = offset


class DomainError(MetrizeError):
    """A function was applied outside its domain (log of a negative, a pole, ...)."""

    def __init__(self, function: str, value: float):
        super().__init__(f"{function}: argument {value!r} outside domain")
        self.function = function
        self.value = value


class SingularMetric(MetrizeError):
    pass


class NonInvertible(MetrizeError):
    pass


class DegenerateProfile(MetrizeError):
    pass


class NoConvergence(MetrizeError):
    """Adaptive quadrature exceeded its subdivision depth."""


QuadratureFailure = NoConvergence


class ConfigError(MetrizeError):
    """A run configuration is malformed.  ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
