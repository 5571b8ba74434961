"""Exception types raised by ffts-eso."""


class FftsEsoError(Exception):
    """Base class for all ffts-eso errors."""


class NotSkewError(FftsEsoError, ValueError):
    """A matrix expected to be skew-symmetric is not."""


class ZeroVectorError(FftsEsoError, ValueError):
    """An operation undefined at the zero vector received one."""


class NotSPDError(FftsEsoError, ValueError):
    """A matrix expected to be symmetric positive definite is not."""


class DomainError(FftsEsoError, ValueError):
    """Arguments fall outside the domain of a closed-form bound."""


class InvalidGainsError(FftsEsoError, ValueError):
    """Observer gains violate one or more design constraints.

    Attributes:
        violations: Human-readable description of each violated constraint.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid gains: " + "; ".join(self.violations))


class NonFiniteStateError(FftsEsoError, ArithmeticError):
    """An integrated state acquired a NaN or infinite component.

    Attributes:
        t: Simulation time at which the step was attempted.
    """

    def __init__(self, t: float):
        self.t = t
        super().__init__(f"non-finite state after step at t={t:.6g} s")
