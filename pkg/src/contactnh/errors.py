"""Exception hierarchy shared by all engine modules."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(EngineError):
    """Malformed expression text.

    ``offset`` is the character position (0-based) at which parsing failed.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownVariable(EngineError):
    """Identifier that is not a chart variable of the declared dimension."""

    def __init__(self, name, offset):
        super().__init__(f"unknown variable '{name}' (offset {offset})")
        self.name = name
        self.offset = offset


class DomainError(EngineError):
    """Evaluation left the domain of an operation (no silent NaN/Inf).

    ``kind`` is one of ``division_by_zero``, ``log_domain``, ``sqrt_domain``,
    ``pow_domain``, ``overflow``; ``offset`` locates the operation in the
    source text the expression was parsed from.
    """

    def __init__(self, kind, offset):
        super().__init__(f"domain error: {kind} (offset {offset})")
        self.kind = kind
        self.offset = offset


class ConfigError(EngineError):
    """Invalid or inconsistent system configuration file."""


class OffConstraint(EngineError):
    """A point that was required to lie on the constraint set does not."""


class SingularC(EngineError):
    """The multiplier matrix is rank deficient; no unique multiplier solve."""


class SingularG(EngineError):
    """The force/constraint-gradient pairing matrix is rank deficient."""


class NotInSplit(EngineError):
    """Vector lies outside the direct sum the projector is defined on."""


class NotPositiveDefinite(EngineError):
    """A metric/Hessian matrix failed its positive-definiteness check."""


class PreconditionFailed(EngineError):
    """A structural hypothesis of the requested operation does not hold."""
