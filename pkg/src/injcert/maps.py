"""Maps R^n -> R^n with Jacobian access, and the built-in corpus."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from . import expr as _expr
from .errors import BadParamsError, DimensionMismatchError, NonFiniteValueError, UnknownIdError


class JacobianKind(str, Enum):
    ANALYTIC = "analytic"
    AUTODIFF = "autodiff"
    FINITE_DIFFERENCE = "finite_difference"


def default_fd_step(x) -> float:
    return 1e-6 * (1.0 + float(np.max(np.abs(x))))


@dataclass(frozen=True)
class MapSpec:
    """A map F: R^n -> R^n.

    ``evaluate`` must be deterministic. ``jacobian_fn`` backs the analytic and
    autodiff sources; finite-difference maps use central differences with
    ``fd_step`` (``None`` means the default scaled step).
    """

    dim: int
    evaluate: Callable[[np.ndarray], Any]
    jacobian_source: JacobianKind = JacobianKind.FINITE_DIFFERENCE
    name: str = ""
    jacobian_fn: Callable[[np.ndarray], Any] | None = None
    fd_step: float | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise BadParamsError("dimension must be a positive integer")
        if self.jacobian_source != JacobianKind.FINITE_DIFFERENCE and self.jacobian_fn is None:
            raise BadParamsError(f"{self.jacobian_source.value} Jacobian needs jacobian_fn")
        if self.fd_step is not None and not self.fd_step > 0:
            raise BadParamsError("finite-difference step must be positive")

    def point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise DimensionMismatchError(f"{self.name or 'map'} expects dimension {self.dim}, got {x.shape[0]}")
        return x

    def __call__(self, x) -> np.ndarray:
        x = self.point(x)
        y = np.asarray(self.evaluate(x), dtype=float).reshape(-1)
        if y.shape[0] != self.dim:
            raise DimensionMismatchError(f"map returned {y.shape[0]} components, expected {self.dim}")
        bad = np.flatnonzero(~np.isfinite(y))
        if bad.size:
            raise NonFiniteValueError(int(bad[0]) + 1, x)
        return y

    def jacobian(self, x) -> np.ndarray:
        x = self.point(x)
        if self.jacobian_source == JacobianKind.FINITE_DIFFERENCE:
            return finite_diff_jacobian(self, x, self.fd_step)
        jac = np.array(self.jacobian_fn(x), dtype=float).reshape(self.dim, self.dim)
        if not np.all(np.isfinite(jac)):
            raise NonFiniteValueError(None, x, "non-finite Jacobian entry")
        return jac

    def negated(self) -> "MapSpec":
        """The map -F, with the same Jacobian source."""
        jac = None if self.jacobian_fn is None else (lambda x: -np.asarray(self.jacobian_fn(x)))
        return MapSpec(
            dim=self.dim,
            evaluate=lambda x: -np.asarray(self.evaluate(x)),
            jacobian_source=self.jacobian_source,
            name=f"-{self.name}",
            jacobian_fn=jac,
            fd_step=self.fd_step,
        )


def finite_diff_jacobian(spec: MapSpec, x, h: float | None = None) -> np.ndarray:
    """Central differences: column j is ``(F(x + h e_j) - F(x - h e_j)) / 2h``."""
    x = spec.point(x)
    if h is None:
        h = default_fd_step(x)
    if not h > 0:
        raise BadParamsError("finite-difference step must be positive")
    n = spec.dim
    jac = np.empty((n, n))
    for j in range(n):
        step = np.zeros(n)
        step[j] = h
        jac[:, j] = (spec(x + step) - spec(x - step)) / (2.0 * h)
    return jac


def ad_jacobian(generic: Callable, x) -> np.ndarray:
    """Jacobian of a scalar-generic map ``generic(list) -> list`` by dual numbers."""
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.shape[0]
    out = generic([_expr.Dual.variable(x[j], j, n) for j in range(n)])
    return np.array([o.partials if isinstance(o, _expr.Dual) else np.zeros(n) for o in out])


def map_from_expr(text_or_ast) -> MapSpec:
    """A :class:`MapSpec` backed by a parsed expression, differentiated by AD."""
    ast = _expr.parse(text_or_ast) if isinstance(text_or_ast, str) else text_or_ast
    return MapSpec(
        dim=ast.n_vars,
        evaluate=functools.partial(_expr.evaluate, ast),
        jacobian_source=JacobianKind.AUTODIFF,
        name=_expr.to_text(ast),
        jacobian_fn=functools.partial(_expr.jacobian_ad, ast),
    )


# ---------------------------------------------------------------------------
# corpus


@dataclass(frozen=True)
class KnownProperties:
    injective: str = "unknown"  # yes / no / unknown
    det_nonvanishing: str = "unknown"
    known_collision: tuple | None = None  # (a, b)


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    params: dict
    spec: MapSpec
    known_properties: KnownProperties
    description: str = ""
    metadata: dict = field(default_factory=dict)

    def summary(self) -> dict:
        kp = self.known_properties
        return {
            "id": self.id,
            "dim": self.spec.dim,
            "params": _jsonable(self.params),
            "jacobian_source": self.spec.jacobian_source.value,
            "injective": kp.injective,
            "det_nonvanishing": kp.det_nonvanishing,
            "known_collision": None
            if kp.known_collision is None
            else [list(map(float, p)) for p in kp.known_collision],
            "description": self.description,
            "metadata": _jsonable(self.metadata),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def pinchuk_generic(v):
    """Pinchuk's polynomial pair (degrees 10 and 25), generic over the scalar type."""
    x, y = v
    t = x * y - 1
    h = t * (x * t + 1)
    f = (x * t + 1) ** 2 * (t * t + y)
    p = f + h
    u = 170 * f * h + 91 * h**2 + 195 * f * h**2 + 69 * h**3 + 75 * f * h**3 + 75 * h**4 / 4
    q = -(t * t) - 6 * t * h * (h + 1) - u
    return [p, q]


def pinchuk_det_sos(x, y):
    """Sum-of-squares form of det F' for Pinchuk's map: t^2 + (t + f(13+15h))^2 + f^2."""
    t = x * y - 1
    h = t * (x * t + 1)
    f = (x * t + 1) ** 2 * (t * t + y)
    return t * t + (t + f * (13 + 15 * h)) ** 2 + f * f


class _ExactJet:
    """Exact first-order jet over Fractions, for determinant validation."""

    __slots__ = ("v", "d")

    def __init__(self, v, d):
        self.v = v
        self.d = d

    def _lift(self, o):
        return o if isinstance(o, _ExactJet) else _ExactJet(Fraction(o), (0,) * len(self.d))

    def __add__(self, o):
        o = self._lift(o)
        return _ExactJet(self.v + o.v, tuple(a + b for a, b in zip(self.d, o.d)))

    __radd__ = __add__

    def __neg__(self):
        return _ExactJet(-self.v, tuple(-a for a in self.d))

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return self._lift(o) - self

    def __mul__(self, o):
        o = self._lift(o)
        return _ExactJet(self.v * o.v, tuple(self.v * b + o.v * a for a, b in zip(self.d, o.d)))

    __rmul__ = __mul__

    def __truediv__(self, k):
        k = Fraction(k)
        return _ExactJet(self.v / k, tuple(a / k for a in self.d))

    def __pow__(self, k: int):
        out = _ExactJet(Fraction(1), (0,) * len(self.d))
        for _ in range(k):
            out = out * self
        return out


def exact_jacobian_det(generic: Callable, point) -> Fraction:
    """det F' at a rational 2-D point, computed exactly from a generic map."""
    x, y = (Fraction(c) for c in point)
    p, q = generic([_ExactJet(x, (Fraction(1), Fraction(0))), _ExactJet(y, (Fraction(0), Fraction(1)))])
    return p.d[0] * q.d[1] - p.d[1] * q.d[0]


@functools.lru_cache(maxsize=1)
def _pinchuk_validation() -> dict:
    # exact det on a coarse rational grid must equal the SOS form and be positive
    coarse = [Fraction(-10) + Fraction(2 * k) for k in range(11)]
    for x in coarse:
        for y in coarse:
            d = exact_jacobian_det(pinchuk_generic, (x, y))
            if d <= 0 or d != pinchuk_det_sos(x, y):
                raise BadParamsError(f"Pinchuk transcription failed validation at ({x}, {y})")
    axis = np.linspace(-10.0, 10.0, 100)
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    dets = pinchuk_det_sos(X, Y)
    if not np.all(dets > 0):
        raise BadParamsError("Pinchuk determinant not positive on the validation grid")
    k = int(np.argmin(dets))
    return {
        "det_grid": "100x100 over [-10,10]^2",
        "det_grid_min": float(dets.flat[k]),
        "det_grid_argmin": [float(X.flat[k]), float(Y.flat[k])],
        "exact_checks": len(coarse) ** 2,
    }


def _pinchuk_eval(v):
    return np.array(pinchuk_generic([float(v[0]), float(v[1])]))


def _param(params: dict, name: str, default):
    return params.get(name, default)


def _identity(params):
    n = int(_param(params, "n", 2))
    if n < 1:
        raise BadParamsError("identity needs n >= 1")
    spec = MapSpec(
        n,
        lambda x: x.copy(),
        JacobianKind.ANALYTIC,
        f"identity({n})",
        lambda x: np.eye(x.shape[0]),
    )
    return {"n": n}, spec, KnownProperties("yes", "yes"), "F(x) = x", {}


def _linear(params):
    A = np.array(_param(params, "matrix", [[1.0, -3.0], [3.0, 1.0]]), dtype=float, ndmin=2)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise BadParamsError(f"linear map needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise BadParamsError("matrix entries must be finite")
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= 1e-14 * max(s[0], 1.0):
        raise BadParamsError("singular matrix requested for the linear entry, which is flagged injective")
    A.setflags(write=False)
    spec = MapSpec(A.shape[0], lambda x: A @ x, JacobianKind.ANALYTIC, "linear", lambda x: A.copy())
    return {"matrix": A.tolist()}, spec, KnownProperties("yes", "yes"), "F(x) = A x", {}


def _rotation90(params):
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    spec = MapSpec(2, lambda x: R @ x, JacobianKind.ANALYTIC, "rotation90", lambda x: R.copy())
    return {}, spec, KnownProperties("yes", "yes"), "F(x, y) = (-y, x); skew Jacobian", {}


def _cubic1d(params):
    spec = MapSpec(
        1,
        lambda x: x**3 - x,
        JacobianKind.ANALYTIC,
        "cubic1d",
        lambda x: np.array([[3.0 * x[0] ** 2 - 1.0]]),
    )
    kp = KnownProperties("no", "no", (np.array([0.0]), np.array([1.0])))
    return {}, spec, kp, "F(x) = x^3 - x", {}


def _square_shift1d(params):
    spec = MapSpec(1, lambda x: x**2, JacobianKind.ANALYTIC, "square_shift1d", lambda x: np.array([[2.0 * x[0]]]))
    kp = KnownProperties("no", "no", (np.array([-1.0]), np.array([1.0])))
    return {}, spec, kp, "F(x) = x^2", {}


def _sin_perturbed1d(params):
    a = float(_param(params, "a", 0.5))
    if not abs(a) < 1.0:
        raise BadParamsError("sin_perturbed1d is flagged injective and needs |a| < 1")
    spec = MapSpec(
        1,
        lambda x: x + a * np.sin(x),
        JacobianKind.ANALYTIC,
        "sin_perturbed1d",
        lambda x: np.array([[1.0 + a * math.cos(x[0])]]),
    )
    meta = {"min_derivative": 1.0 - abs(a), "min_sym_part": 2.0 * (1.0 - abs(a))}
    return {"a": a}, spec, KnownProperties("yes", "yes"), "F(x) = x + a sin(x)", meta


def _arctan1d(params):
    spec = MapSpec(
        1,
        np.arctan,
        JacobianKind.ANALYTIC,
        "arctan1d",
        lambda x: np.array([[1.0 / (1.0 + x[0] ** 2)]]),
    )
    desc = "F(x) = arctan(x); F' > 0 but not bounded away from zero"
    return {}, spec, KnownProperties("yes", "yes"), desc, {}


def _pinchuk(params):
    meta = dict(_pinchuk_validation())
    spec = MapSpec(
        2,
        _pinchuk_eval,
        JacobianKind.AUTODIFF,
        "pinchuk",
        functools.partial(ad_jacobian, pinchuk_generic),
    )
    kp = KnownProperties("no", "yes", (np.array([1.0, 0.0]), np.array([-1.0, -2.0])))
    desc = "Pinchuk's non-injective polynomial map with everywhere-positive Jacobian determinant"
    return {}, spec, kp, desc, meta


_BUILDERS = {
    "identity": _identity,
    "linear": _linear,
    "rotation90": _rotation90,
    "cubic1d": _cubic1d,
    "square_shift1d": _square_shift1d,
    "sin_perturbed1d": _sin_perturbed1d,
    "arctan1d": _arctan1d,
    "pinchuk": _pinchuk,
}

BUILTIN_IDS = tuple(_BUILDERS)


def get_builtin(id: str, **params) -> CorpusEntry:
    """Look up a corpus map by id, e.g. ``get_builtin("identity", n=3)``."""
    try:
        builder = _BUILDERS[id]
    except KeyError:
        raise UnknownIdError(id, BUILTIN_IDS) from None
    used, spec, kp, desc, meta = builder(params)
    unknown = set(params) - set(used)
    if unknown:
        raise BadParamsError(f"{id} does not take parameter(s) {sorted(unknown)}")
    return CorpusEntry(id, used, spec, kp, desc, meta)
