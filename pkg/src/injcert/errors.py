"""Exception hierarchy.

Numerical failures (``NumericalError`` subclasses) are kept apart from bad
input so the CLI can map them to distinct exit codes.
"""

from __future__ import annotations


class InjcertError(Exception):
    """Base class for every error raised by this package."""


class UsageError(InjcertError, ValueError):
    """Bad arguments or malformed input."""


class NumericalError(InjcertError, ArithmeticError):
    """A computation failed for numerical reasons."""


# map model / corpus


class UnknownIdError(UsageError, KeyError):
    def __init__(self, name: str, known=()):
        self.name = name
        self.known = tuple(known)
        msg = f"unknown map id {name!r}"
        if self.known:
            msg += f"; known ids: {', '.join(self.known)}"
        super().__init__(msg)

    def __str__(self) -> str:
        return self.args[0]


class BadParamsError(UsageError):
    pass


class DimensionMismatchError(UsageError):
    pass


class NonFiniteValueError(NumericalError):
    """A map (or expression) produced NaN or infinity.

    ``component`` is 1-based, matching the variable naming ``x1..xn``.
    """

    def __init__(self, component: int | None = None, point=None, message: str = ""):
        self.component = component
        self.point = point
        if not message:
            message = "non-finite value"
            if component is not None:
                message += f" in component {component}"
            if point is not None:
                message += f" at {list(point)}"
        super().__init__(message)


# expression parsing


class ExprSyntaxError(UsageError):
    def __init__(self, position: int, expected, text: str = ""):
        self.position = position
        self.expected = tuple(expected)
        self.text = text
        msg = f"syntax error at position {position}: expected {' or '.join(self.expected)}"
        if text:
            msg += f"\n  {text}\n  {' ' * position}^"
        super().__init__(msg)


class UnknownIdentifierError(UsageError):
    def __init__(self, name: str, position: int | None = None):
        self.name = name
        self.position = position
        where = "" if position is None else f" at position {position}"
        super().__init__(f"unknown identifier {name!r}{where}")


# linear algebra


class NoConvergenceError(NumericalError):
    def __init__(self, message: str = "iteration did not converge", best=None):
        self.best = best
        super().__init__(message)


class NotSymmetricError(UsageError):
    pass


class ZeroVectorError(UsageError):
    pass


class SingularJacobianError(NumericalError):
    def __init__(self, point=None, sigma_min: float | None = None):
        self.point = point
        self.sigma_min = sigma_min
        msg = "Jacobian is numerically singular"
        if point is not None:
            msg += f" at {list(point)}"
        if sigma_min is not None:
            msg += f" (sigma_min={sigma_min:.3e})"
        super().__init__(msg)


# certification


class GridTooLargeError(UsageError):
    pass


class ProbeFailedError(InjcertError):
    """Strong-monotonicity probe found a pair below the certified bound."""

    def __init__(self, a, b, ratio: float, bound: float):
        self.a = a
        self.b = b
        self.ratio = ratio
        self.bound = bound
        super().__init__(
            f"monotonicity probe failed: ratio {ratio:.6g} < {bound:.6g} "
            f"for a={list(a)}, b={list(b)}"
        )


# merit geometry


class SingularAtZeroError(NumericalError):
    pass


class RingNotSeparatingError(UsageError):
    pass


class NonPositiveAlphaError(NumericalError):
    pass


# mountain pass


class DegeneratePathError(UsageError):
    pass


class EndpointNotLowError(UsageError):
    pass


class EmptyTraceError(UsageError):
    pass


class NotACriticalRingError(UsageError):
    pass
