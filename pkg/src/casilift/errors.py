"""Exception types shared across the package."""


class CasiliftError(Exception):
    """Base class for all package errors."""


class DomainError(CasiliftError, ValueError):
    """An argument lies outside the physical/mathematical domain of an operation."""


class StaticMetalError(DomainError):
    """A metallic (Drude) permittivity was requested at zero frequency.

    Callers that need the zero-frequency limit should use ``static_limit``,
    which reports the metallic divergence explicitly.
    """


class ConfigError(CasiliftError, ValueError):
    """A configuration or material file failed validation."""


class NumericalError(CasiliftError, RuntimeError):
    """A quadrature or summation failed to reach its requested tolerance.

    Carries the achieved residual and any context the failing routine can
    provide (frequency, separation, temperature).
    """

    def __init__(self, message, residual=None, context=None):
        super().__init__(message)
        self.residual = residual
        self.context = dict(context or {})

    def __str__(self):
        base = super().__str__()
        parts = [base]
        if self.residual is not None:
            parts.append(f"achieved residual {self.residual:.3e}")
        if self.context:
            ctx = ", ".join(f"{k}={v!r}" for k, v in sorted(self.context.items()))
            parts.append(f"[{ctx}]")
        return " ".join(parts)
