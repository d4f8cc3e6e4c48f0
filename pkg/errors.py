from typing import Any, Dict, List, Optional, Tuple


# === Exit codes ===

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INVALID_ARGUMENT = 2
EXIT_NUMERIC_FAILURE = 3


class BcsGapError(Exception):
    """Base class for everything the library raises on purpose."""

    exit_code = EXIT_NUMERIC_FAILURE


# === Bad input ===

class InvalidArgumentError(BcsGapError, ValueError):
    exit_code = EXIT_INVALID_ARGUMENT


class BelowFloorError(InvalidArgumentError):
    """μ is so small that exp(π/(2√μ·a)) underflows the representable range."""

    def __init__(self, mu: float, floor_mu: float, floor_value: float):
        self.mu = mu
        self.floor_mu = floor_mu
        self.floor_value = floor_value
        super().__init__(
            f"mu={mu:.6g} is below the underflow floor: need sqrt(mu)*|a| >= {floor_value:.6g} "
            f"(mu >= {floor_mu:.6g})"
        )


# === Numerical failures ===

class NumericalError(BcsGapError, ArithmeticError):
    exit_code = EXIT_NUMERIC_FAILURE


class QuadratureError(NumericalError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (error estimate {residual:.3g})")


class BoundStateError(NumericalError):
    """1 + B is numerically singular: -1 sits in the Birman-Schwinger spectrum."""


class ResonanceError(NumericalError):
    """u'(R) vanishes at the matching radius, so the scattering length is infinite."""


class TrivialSolutionError(NumericalError):
    def __init__(self, message: str, sup_delta: float, seed: float):
        self.sup_delta = sup_delta
        self.seed = seed
        super().__init__(f"{message} (sup delta {sup_delta:.3g}, seed {seed:.3g})")


class NonConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} after {iterations} iterations (last residual {residual:.3g})")


class BracketingError(NumericalError):
    def __init__(self, message: str, samples: List[Tuple[float, float]]):
        self.samples = samples
        listed = ", ".join(f"T={t:.3g}: {m:+.3g}" for t, m in samples)
        super().__init__(f"{message} [{listed}]")


class InconsistentSolutionError(NumericalError):
    pass


class RangeError(NumericalError):
    pass


class BudgetExceededError(NumericalError):
    def __init__(self, message: str, partial: Optional[Dict[str, Any]] = None, bound: float = float("nan")):
        self.partial = partial or {}
        self.bound = bound
        super().__init__(f"{message} (bound {bound:.3g})")
