"""Merit function for a candidate collision pair.

Given x1, x2 with F(x1) = F(x2), shift so one zero sits at the origin:

    I(x) = F(x + x1) - F(x2),    J(x) = I(x) . I(x)

J vanishes at 0 and at x0 = x2 - x1, and a small sphere around 0 separates
the two zeros whenever I'(0) is invertible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .errors import (
    BadParamsError,
    DimensionMismatchError,
    NonPositiveAlphaError,
    RingNotSeparatingError,
    SingularAtZeroError,
)
from .maps import MapSpec

COLLISION_TOL = 1e-8


@dataclass(frozen=True)
class MeritProblem:
    map: MapSpec
    x1: np.ndarray
    x2: np.ndarray
    x0: np.ndarray
    fx2: np.ndarray = field(repr=False)
    collision_residual: float = 0.0
    warning: str | None = None

    @property
    def dim(self) -> int:
        return self.map.dim

    @property
    def is_collision(self) -> bool:
        return self.warning is None


@dataclass(frozen=True)
class RingLevel:
    rho: float
    alpha: float
    samples: int
    argmin: np.ndarray


def make_merit(spec: MapSpec, x1, x2) -> MeritProblem:
    """Build the merit problem for the pair (x1, x2).

    ``warning`` is set when ``|F(x1) - F(x2)| > 1e-8``, i.e. the pair is not
    a collision and J(0) > 0.
    """
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if x1.shape[0] != spec.dim or x2.shape[0] != spec.dim:
        raise DimensionMismatchError(
            f"points must have dimension {spec.dim}, got {x1.shape[0]} and {x2.shape[0]}"
        )
    fx2 = spec(x2)
    residual = float(np.linalg.norm(spec(x1) - fx2))
    warning = None
    if residual > COLLISION_TOL:
        warning = f"not a collision: |F(x1) - F(x2)| = {residual:.3e}, so J(0) > 0"
    return MeritProblem(spec, x1, x2, x2 - x1, fx2, residual, warning)


def eval_I(p: MeritProblem, x) -> np.ndarray:
    x = p.map.point(x)
    return p.map(x + p.x1) - p.fx2


def jac_I(p: MeritProblem, x) -> np.ndarray:
    x = p.map.point(x)
    return p.map.jacobian(x + p.x1)


def eval_J(p: MeritProblem, x) -> float:
    """``|F(x + x1) - F(x2)|^2``."""
    r = eval_I(p, x)
    return float(r @ r)


def grad_J(p: MeritProblem, x) -> np.ndarray:
    """Column gradient ``2 I'(x)^T I(x)``."""
    return 2.0 * jac_I(p, x).T @ eval_I(p, x)


def _unit_directions(n: int, count: int, seed: int) -> np.ndarray:
    axes = np.vstack([np.eye(n), -np.eye(n)])
    rng = np.random.default_rng(seed)
    rand = rng.standard_normal((count, n))
    rand /= np.linalg.norm(rand, axis=1, keepdims=True)
    if n == 1:
        # the 1-D sphere is just the two axis points
        return axes
    return np.vstack([axes, rand])


def isolated_zero_radius(
    p: MeritProblem,
    *,
    r_max: float = 1e6,
    directions: int | None = None,
    radial=(1.0, 0.5),
    rtol: float = 1e-12,
    seed: int = 0,
) -> float:
    """Radius r on which every row of I'(xi) stays within
    ``sigma_min(I'(0)) / (2 sqrt(n))`` of the same row of I'(0).

    Under that bound any matrix whose i-th row is taken from I'(xi_i), with
    each xi_i in B_r, is within ``sigma_min(I'(0)) / 2`` of I'(0) in
    Frobenius norm and therefore nonsingular. The bound is checked on
    sampled points and the largest passing radius found by bisection.
    """
    n = p.dim
    J0 = jac_I(p, np.zeros(n))
    smin = spectral.sigma_min(J0)
    if spectral.det(J0) == 0.0 or smin <= 1e-12 * max(np.max(np.abs(J0)), 1e-300):
        raise SingularAtZeroError(
            f"I'(0) = F'(x1) is singular (sigma_min={smin:.3e}); the hypotheses fail at x1"
        )
    bound = smin / (2.0 * math.sqrt(n))
    dirs = _unit_directions(n, 64 * n if directions is None else directions, seed)
    fractions = np.asarray(radial, dtype=float)

    def ok(r: float) -> bool:
        for frac in fractions:
            for d in dirs:
                dev = np.linalg.norm(jac_I(p, r * frac * d) - J0, axis=1)
                if np.any(dev > bound):
                    return False
        return True

    if ok(r_max):
        return float(r_max)
    hi = r_max
    lo = r_max / 2.0
    while not ok(lo):
        hi = lo
        lo /= 2.0
        if lo < 1e-300:
            raise SingularAtZeroError("no positive radius satisfies the row-deviation bound")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return float(lo)


def ring_level(
    p: MeritProblem,
    rho: float,
    sphere_samples: int | None = None,
    *,
    seed: int = 0,
    check_radius: bool = True,
) -> RingLevel:
    """Minimum of J over sampled points of the sphere |x| = rho.

    Samples the 2n axis points plus ``sphere_samples`` random directions
    (default ``64 n``). With ``check_radius`` the radius must lie inside the
    ball ``B_{r / sqrt(n)}`` from :func:`isolated_zero_radius`.
    """
    n = p.dim
    if not rho > 0:
        raise BadParamsError("rho must be positive")
    if np.linalg.norm(p.x0) <= rho:
        raise RingNotSeparatingError(
            f"|x0| = {np.linalg.norm(p.x0):.6g} <= rho = {rho:.6g}: the sphere does not separate the zeros"
        )
    if check_radius:
        limit = isolated_zero_radius(p, seed=seed) / math.sqrt(n)
        if rho > limit * (1.0 + 1e-12):
            raise BadParamsError(f"rho = {rho:.6g} exceeds the isolated-zero radius bound {limit:.6g}")
    dirs = _unit_directions(n, 64 * n if sphere_samples is None else sphere_samples, seed)
    values = [eval_J(p, rho * d) for d in dirs]
    k = int(np.argmin(values))
    alpha = float(values[k])
    if alpha <= 1e-14:
        raise NonPositiveAlphaError(
            f"J = {alpha:.3e} on the sphere of radius {rho:.6g}; the isolated-zero radius was overestimated"
        )
    return RingLevel(rho=float(rho), alpha=alpha, samples=len(dirs), argmin=rho * dirs[k])
