"""Collision search and pointwise inversion.

``find_collision`` looks for a < > b with F(a) = F(b) by minimizing

    phi(a, b) = |F(a) - F(b)|^2 + w * max(0, s - |a - b|)^2

from random starts in a box. The penalty keeps starts off the diagonal; each
local minimum is then polished by solving F(a) = F(b) for a with b frozen.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import spectral
from .certify import as_box
from .errors import (
    BadParamsError,
    NoConvergenceError,
    NumericalError,
    SingularJacobianError,
)
from .maps import MapSpec


@dataclass(frozen=True)
class CollisionWitness:
    a: np.ndarray
    b: np.ndarray
    residual: float
    separation: float

    def to_dict(self) -> dict:
        return {
            "a": [float(v) for v in self.a],
            "b": [float(v) for v in self.b],
            "residual": self.residual,
            "separation": self.separation,
        }


@dataclass(frozen=True)
class CollisionSearch:
    """Outcome of a search. ``witness`` is None when nothing was found.

    ``best_residual`` is the smallest |F(a) - F(b)| seen over pairs at least
    ``min_separation`` apart.
    """

    witness: CollisionWitness | None
    best_residual: float
    best_pair: tuple | None
    starts: int
    seed: int
    collision_tol: float
    min_separation: float

    @property
    def found(self) -> bool:
        return self.witness is not None

    def to_dict(self) -> dict:
        return {
            "status": "Found" if self.found else "NotFound",
            "witness": None if self.witness is None else self.witness.to_dict(),
            "best_residual": self.best_residual,
            "best_pair": None
            if self.best_pair is None
            else [[float(v) for v in p] for p in self.best_pair],
            "starts": self.starts,
            "seed": self.seed,
            "collision_tol": self.collision_tol,
            "min_separation": self.min_separation,
        }


@dataclass(frozen=True)
class InverseResult:
    x: np.ndarray
    residual: float
    inv_jacobian: np.ndarray
    iterations: int

    def to_dict(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "residual": self.residual,
            "inv_jacobian": self.inv_jacobian.tolist(),
            "iterations": self.iterations,
        }


def _check_singular(spec: MapSpec, x, jac) -> None:
    smin = spectral.sigma_min(jac)
    if smin <= 1e-12 * np.linalg.norm(jac, 2):
        raise SingularJacobianError(x, smin)


def inverse_jacobian(spec: MapSpec, x) -> np.ndarray:
    """F'(x)^-1, the Jacobian of the local inverse at F(x)."""
    x = spec.point(x)
    jac = spec.jacobian(x)
    _check_singular(spec, x, jac)
    try:
        return spectral.lu_solve(jac, np.eye(spec.dim))
    except ZeroDivisionError:
        raise SingularJacobianError(x, spectral.sigma_min(jac)) from None


def newton_invert(
    spec: MapSpec,
    y,
    x_init=None,
    tol: float = 1e-10,
    max_iter: int = 100,
    *,
    max_halvings: int = 30,
) -> InverseResult:
    """Solve F(x) = y by damped Newton from ``x_init`` (default: origin).

    The step is halved while the residual fails to decrease.
    """
    if not tol > 0:
        raise BadParamsError("tol must be positive")
    y = spec.point(y)
    x = np.zeros(spec.dim) if x_init is None else spec.point(x_init).copy()
    r = spec(x) - y
    res = float(np.linalg.norm(r))
    for it in range(max_iter + 1):
        if res <= tol:
            return InverseResult(x, res, inverse_jacobian(spec, x), it)
        if it == max_iter:
            break
        jac = spec.jacobian(x)
        _check_singular(spec, x, jac)
        try:
            step = spectral.lu_solve(jac, r)
        except ZeroDivisionError:
            raise SingularJacobianError(x, spectral.sigma_min(jac)) from None
        lam = 1.0
        for _ in range(max_halvings + 1):
            cand = x - lam * step
            try:
                r_new = spec(cand) - y
                res_new = float(np.linalg.norm(r_new))
            except NumericalError:
                res_new = math.inf
            if res_new < res:
                break
            lam *= 0.5
        else:
            raise NoConvergenceError(
                f"line search failed after {max_halvings} halvings (residual {res:.3e})",
                best=(x, res),
            )
        x, r, res = cand, r_new, res_new
    raise NoConvergenceError(f"no convergence in {max_iter} iterations (residual {res:.3e})", best=(x, res))


def _phi(spec: MapSpec, z, sep: float, weight: float):
    n = spec.dim
    a, b = z[:n], z[n:]
    r = spec(a) - spec(b)
    d = a - b
    dist = float(np.linalg.norm(d))
    val = float(r @ r)
    grad = np.concatenate([2.0 * spec.jacobian(a).T @ r, -2.0 * spec.jacobian(b).T @ r])
    gap = sep - dist
    if gap > 0:
        val += weight * gap * gap
        if dist > 0:
            pull = 2.0 * weight * gap * d / dist
            grad[:n] -= pull
            grad[n:] += pull
    return val, grad


def _spread(a, b, sep: float, box: np.ndarray):
    # push a too-close pair apart to exactly ``sep`` about its midpoint
    d = a - b
    dist = float(np.linalg.norm(d))
    if dist >= sep:
        return a, b
    u = d / dist if dist > 0 else np.eye(len(a))[0]
    mid = 0.5 * (a + b)
    a2 = np.clip(mid + 0.5 * sep * u, box[:, 0], box[:, 1])
    b2 = np.clip(mid - 0.5 * sep * u, box[:, 0], box[:, 1])
    return a2, b2


def _one_start(spec, box, z0, tol, sep, weight, max_iter):
    n = spec.dim
    bounds = [tuple(lh) for lh in box] * 2
    try:
        opt = minimize(
            lambda z: _phi(spec, z, sep, weight),
            z0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": max_iter, "ftol": 1e-30, "gtol": 1e-14},
        )
        a, b = opt.x[:n].copy(), opt.x[n:].copy()
    except NumericalError:
        return None
    # polish: solve F(a) = F(b) for a, b frozen
    try:
        inv = newton_invert(spec, spec(b), a, tol=0.1 * tol, max_iter=50)
        if np.linalg.norm(inv.x - b) >= sep and np.all(inv.x >= box[:, 0]) and np.all(inv.x <= box[:, 1]):
            a = inv.x
    except NumericalError:
        pass
    a, b = _spread(a, b, sep, box)
    try:
        res = float(np.linalg.norm(spec(a) - spec(b)))
    except NumericalError:
        return None
    return res, a, b


def find_collision(
    spec: MapSpec,
    box,
    n_starts: int = 32,
    collision_tol: float = 1e-8,
    min_separation: float = 0.1,
    *,
    penalty_weight: float = 1.0,
    seed: int = 0,
    workers: int = 1,
    max_iter: int = 2000,
) -> CollisionSearch:
    """Multi-start search for a pair with |F(a) - F(b)| <= ``collision_tol``
    and |a - b| >= ``min_separation`` inside ``box``.

    Starts are drawn up front from ``seed`` and reduced by
    ``(residual, a, b)``, so the result does not depend on ``workers``.
    """
    if n_starts < 1:
        raise BadParamsError("n_starts must be at least 1")
    if not min_separation > 0:
        raise BadParamsError("min_separation must be positive")
    if not collision_tol > 0:
        raise BadParamsError("collision_tol must be positive")
    box = as_box(box, spec.dim)
    rng = np.random.default_rng(seed)
    lo = np.tile(box[:, 0], 2)
    hi = np.tile(box[:, 1], 2)
    starts = rng.uniform(lo, hi, size=(n_starts, 2 * spec.dim))

    def run(z0):
        return _one_start(spec, box, z0, collision_tol, min_separation, penalty_weight, max_iter)

    if workers > 1 and n_starts > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(z) for z in starts]

    cands = [r for r in results if r is not None]
    if not cands:
        return CollisionSearch(None, math.inf, None, n_starts, seed, collision_tol, min_separation)
    res, a, b = min(cands, key=lambda c: (c[0], tuple(c[1]), tuple(c[2])))
    sep = float(np.linalg.norm(a - b))
    witness = None
    if res <= collision_tol and sep >= min_separation:
        witness = CollisionWitness(a, b, res, sep)
    return CollisionSearch(witness, res, (a, b), n_starts, seed, collision_tol, min_separation)
