"""Exception types shared across the package."""


class RisJcasError(Exception):
    """Base class for all package-specific errors."""


class DomainError(RisJcasError):
    """An input lies outside the mathematical domain of an operation."""


class ShapeError(RisJcasError):
    """Array arguments have incompatible shapes."""


class QuadratureError(RisJcasError):
    """The coupling-matrix quadrature failed its self-consistency check."""


class SingularReflection(RisJcasError):
    """The reflection operator solve is too ill-conditioned to trust."""


class GeometryError(RisJcasError):
    """An array layout is degenerate (e.g. coincident elements)."""


class UnsupportedBits(RisJcasError):
    """Requested quantizer resolution is outside the supported range."""


class EmptyInput(RisJcasError):
    """An operation requiring at least one element received none."""


class ConfigError(RisJcasError):
    """An experiment configuration failed to parse or validate."""


class NumericalAbort(RisJcasError):
    """An optimization run had to be abandoned (carries diagnostics)."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
