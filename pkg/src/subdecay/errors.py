"""Exception hierarchy shared by all subdecay modules."""


class SubdecayError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SubdecayError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedRangeError(DomainError):
    """Parameters are structurally valid but outside the validated accuracy
    envelope; refusing to return a silently degraded value."""


class ConfigError(SubdecayError, ValueError):
    """A run configuration failed validation. ``problems`` lists every
    violated field."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NumericalError(SubdecayError, RuntimeError):
    """A numerical procedure failed to reach its accuracy target."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge; message carries diagnostics."""


class SolverError(NumericalError):
    """A linear solve failed (singular or numerically unusable system)."""


class ConsistencyError(NumericalError):
    """An internal cross-check failed (e.g. a located pole violating the
    half-plane condition)."""
