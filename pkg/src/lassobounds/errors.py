"""Exception hierarchy.

Each exception carries the CLI exit code it maps to, so the command line
front end can translate failures without a lookup table.
"""


class LassoBoundsError(Exception):
    exit_code = 1


class InputError(LassoBoundsError, ValueError):
    """Malformed input file or argument."""

    exit_code = 1


class NotPSD(LassoBoundsError, ValueError):
    exit_code = 2


class DegenerateKappa(LassoBoundsError, ArithmeticError):
    """A compatibility constant needed as a divisor is (numerically) zero."""

    exit_code = 2


class RankDeficient(LassoBoundsError, ArithmeticError):
    exit_code = 2


class InfeasibleSpec(LassoBoundsError, ValueError):
    exit_code = 1


class CapExceeded(LassoBoundsError, ValueError):
    exit_code = 1


class OddDistance(LassoBoundsError, ValueError):
    exit_code = 1


class HypothesisFailed(LassoBoundsError):
    """A hypothesis of a bound does not hold for the requested configuration."""

    exit_code = 3

    def __init__(self, condition, detail=""):
        self.condition = condition
        msg = condition if not detail else f"{condition}: {detail}"
        super().__init__(msg)


class BetaminViolated(LassoBoundsError):
    exit_code = 4

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class NoConvergence(LassoBoundsError, RuntimeError):
    """Iterative solver hit its iteration cap.

    The best iterate and its residual are attached so callers can decide
    whether the answer is usable anyway.
    """

    exit_code = 1

    def __init__(self, max_iter, best=None, residual=float("nan")):
        self.max_iter = max_iter
        self.best = best
        self.residual = residual
        super().__init__(
            f"no convergence after {max_iter} iterations (residual {residual:.3e})"
        )
