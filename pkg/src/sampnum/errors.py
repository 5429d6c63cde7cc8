"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/model problems exit with 2,
rank and certification failures with 3, truncation failures with 4.
"""


class InvalidModelError(ValueError):
    """Kernel model parameters outside the admissible range."""


class TruncationError(ArithmeticError):
    """A tail could not be certified below the requested tolerance."""


class RankError(ArithmeticError):
    """A least-squares matrix is numerically rank deficient."""


class CertificationError(RuntimeError):
    """Repeated failure to certify a random frame or a sub-frame."""


class ConsistencyError(RuntimeError):
    """An internal invariant was violated (e.g. a sampling envelope)."""


class BudgetError(ValueError):
    """Exhaustive search requested beyond its size budget."""


class SearchFailure(RuntimeError):
    """A heuristic partition search did not meet the required bounds.

    Distinct from mathematical infeasibility: a larger search budget may
    still succeed.
    """
