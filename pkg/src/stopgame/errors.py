"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid problem or run configuration."""


class DomainError(ValueError):
    """Evaluation outside a function's domain (log/sqrt of a negative,
    division by zero, x outside the state space, ...)."""

    def __init__(self, message, subexpr=None):
        super().__init__(message)
        self.subexpr = subexpr


class AssumptionViolation(RuntimeError):
    """A sampled precondition (e.g. monotonicity of a coefficient) failed."""


class WindowTooSmall(ConfigError):
    """Truncation window does not contain the continuation region."""


class NewtonDivergence(RuntimeError):
    """Newton iteration failed to reduce the residual."""

    def __init__(self, time_index, residual, iterations):
        super().__init__(
            f"Newton failed at time index {time_index}: "
            f"residual {residual:.3e} after {iterations} iterations"
        )
        self.time_index = time_index
        self.residual = residual
        self.iterations = iterations


class FixedPointStall(RuntimeError):
    """Projection sweeps did not reach a joint fixed point."""


class GridMismatch(ValueError):
    """Two surfaces that must share a grid do not."""


class BoundaryBelowDomain(ValueError):
    """A reflection boundary dips below the state space."""


class PreconditionFailure(RuntimeError):
    """A construction's hypothesis does not hold (e.g. b(t) at the domain
    infimum, so the reflected control cannot be built)."""


class ExprSyntaxError(ValueError):
    """Parse failure with the byte offset and the tokens that were expected."""

    def __init__(self, message, offset, expected=()):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.expected = tuple(expected)


class UnknownIdentifier(ExprSyntaxError):
    """Identifier outside {t, x, function table}."""

    def __init__(self, name, offset):
        super().__init__(f"unknown identifier '{name}'", offset)
        self.name = name
