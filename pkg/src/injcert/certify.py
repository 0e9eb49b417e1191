"""Grid certification of the two spectral hypotheses.

For a map F the hypotheses are, at every sampled x:

* every eigenvalue lambda of F'(x) has ``|lambda| >= eps``;
* every eigenvalue mu of ``F'(x) + F'(x).T`` satisfies ``mu >= eps``
  everywhere, or ``mu <= -eps`` everywhere.

A ``Satisfied`` verdict only means no violation was found on the grid: it
is sampled evidence, not a proof over the box, let alone over all of R^n.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import spectral
from .errors import (
    BadParamsError,
    DimensionMismatchError,
    GridTooLargeError,
    NumericalError,
    ProbeFailedError,
    UsageError,
)
from .maps import MapSpec

MAX_GRID_POINTS = 10**7
WORDING = "grid-consistent with hypotheses (sampled evidence, not a proof)"


class Status(str, Enum):
    SATISFIED = "Satisfied"
    VIOLATED = "Violated"
    UNKNOWN = "Unknown"


class Regime(str, Enum):
    POSITIVE_DEFINITE = "PositiveDefinite"
    NEGATIVE_DEFINITE = "NegativeDefinite"
    MIXED = "Mixed"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class PointCheck:
    x: np.ndarray
    min_abs_lambda: float
    sym_min: float
    sym_max: float
    det_jac: float

    def to_dict(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "min_abs_lambda": self.min_abs_lambda,
            "sym_min": self.sym_min,
            "sym_max": self.sym_max,
            "det_jac": self.det_jac,
        }


@dataclass
class CertificationVerdict:
    status: Status
    regime: Regime
    epsilon_estimate: float
    witness: PointCheck | None
    samples: int
    box: np.ndarray
    eps: float
    grid_per_axis: int
    sym_margin: float | None = None  # min definiteness margin, for the monotonicity probe
    failure: dict | None = None
    wording: str = WORDING

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "regime": self.regime.value,
            "epsilon_estimate": self.epsilon_estimate,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "samples": self.samples,
            "box": np.asarray(self.box).tolist(),
            "eps": self.eps,
            "grid_per_axis": self.grid_per_axis,
            "sym_margin": self.sym_margin,
            "failure": self.failure,
            "wording": self.wording,
        }


@dataclass
class ProbeReport:
    pairs: int
    eps: float
    bound: float
    min_ratio: float
    worst_pair: tuple
    seed: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pairs": self.pairs,
            "eps": self.eps,
            "bound": self.bound,
            "min_ratio": self.min_ratio,
            "worst_pair": [[float(v) for v in p] for p in self.worst_pair],
            "seed": self.seed,
        }


def as_box(box, dim: int) -> np.ndarray:
    """Normalize ``[(lo, hi), ...]`` to an ``(n, 2)`` array, checking order."""
    b = np.array(box, dtype=float, ndmin=2)
    if b.shape != (dim, 2):
        raise DimensionMismatchError(f"box must have {dim} (lo, hi) pairs, got shape {b.shape}")
    if not np.all(b[:, 0] <= b[:, 1]):
        raise BadParamsError("box needs lo <= hi on every axis")
    return b


def check_point(spec: MapSpec, x, eps: float = 1.0) -> PointCheck:
    """Spectral margins of F'(x) and F'(x) + F'(x).T at one point."""
    if not eps > 0:
        raise BadParamsError("eps must be positive")
    x = spec.point(x)
    J = spec.jacobian(x)
    lam = spectral.eig_general(J)
    mu = spectral.eig_symmetric(spectral.sym_part(J))
    return PointCheck(
        x=x,
        min_abs_lambda=float(np.min(np.abs(lam))),
        sym_min=float(mu[0]),
        sym_max=float(mu[-1]),
        det_jac=spectral.det(J),
    )


def grid_points(box: np.ndarray, grid_per_axis: int) -> list:
    axes = [np.linspace(lo, hi, grid_per_axis) for lo, hi in box]
    return [np.array(p) for p in itertools.product(*axes)]


def _check_many(spec, points, eps, workers):
    def run(chunk):
        out = []
        for x in chunk:
            try:
                out.append(check_point(spec, x, eps))
            except NumericalError as exc:
                out.append(exc)
        return out

    if workers <= 1 or len(points) < 256:
        return run(points)
    size = math.ceil(len(points) / workers)
    chunks = [points[i : i + size] for i in range(0, len(points), size)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run, chunks))
    return [r for chunk in results for r in chunk]


def certify_box(
    spec: MapSpec,
    box,
    grid_per_axis: int,
    eps: float,
    *,
    extra_points=(),
    workers: int = 1,
) -> CertificationVerdict:
    """Check both hypotheses on a uniform grid (corners included).

    ``extra_points`` are evaluated in addition to the grid; passing earlier
    witnesses there keeps a refined run from losing a known violation.
    """
    if not eps > 0:
        raise BadParamsError("eps must be positive")
    if grid_per_axis < 2:
        raise BadParamsError("grid_per_axis must be at least 2")
    box = as_box(box, spec.dim)
    if grid_per_axis**spec.dim > MAX_GRID_POINTS:
        raise GridTooLargeError(
            f"{grid_per_axis}^{spec.dim} grid points exceeds the limit of {MAX_GRID_POINTS}"
        )
    points = grid_points(box, grid_per_axis)
    points += [spec.point(p) for p in extra_points]
    results = _check_many(spec, points, eps, workers)

    for i, r in enumerate(results):
        if isinstance(r, Exception):
            return CertificationVerdict(
                status=Status.UNKNOWN,
                regime=Regime.INDETERMINATE,
                epsilon_estimate=0.0,
                witness=None,
                samples=i,
                box=box,
                eps=eps,
                grid_per_axis=grid_per_axis,
                failure={
                    "point": [float(v) for v in points[i]],
                    "error": type(r).__name__,
                    "message": str(r),
                },
            )
    return classify(results, box=box, eps=eps, grid_per_axis=grid_per_axis)


def classify(checks, *, box, eps: float, grid_per_axis: int = 0) -> CertificationVerdict:
    """Reduce point checks to a verdict (order-independent)."""
    sym_min = np.array([c.sym_min for c in checks])
    sym_max = np.array([c.sym_max for c in checks])
    mal = np.array([c.min_abs_lambda for c in checks])
    n_pos = int(np.sum(sym_min > 0))
    n_neg = int(np.sum(sym_max < 0))
    total = len(checks)
    if n_pos == total:
        regime = Regime.POSITIVE_DEFINITE
    elif n_neg == total:
        regime = Regime.NEGATIVE_DEFINITE
    elif n_pos or n_neg:
        regime = Regime.MIXED
    else:
        regime = Regime.INDETERMINATE

    margin = sym_min if n_pos >= n_neg else -sym_max
    score = np.minimum(mal, margin)
    worst = min(range(total), key=lambda i: (score[i], tuple(checks[i].x)))
    definite = regime in (Regime.POSITIVE_DEFINITE, Regime.NEGATIVE_DEFINITE)
    satisfied = definite and score[worst] >= eps
    return CertificationVerdict(
        status=Status.SATISFIED if satisfied else Status.VIOLATED,
        regime=regime,
        epsilon_estimate=max(0.0, float(score[worst])),
        witness=None if satisfied else checks[worst],
        samples=total,
        box=np.asarray(box),
        eps=eps,
        grid_per_axis=grid_per_axis,
        sym_margin=float(np.min(margin)) if definite else None,
    )


def monotonicity_probe(
    spec: MapSpec,
    box,
    pairs: int,
    eps: float | None = None,
    *,
    verdict: CertificationVerdict | None = None,
    seed: int = 0,
) -> ProbeReport:
    """Check ``(F(a) - F(b)) . (a - b) >= (eps/2) |a - b|^2`` on random pairs.

    On a convex box this follows from ``F' + F'.T >= eps I``, so a failure
    means the certification grid missed a violation. ``eps`` defaults to the
    symmetric-part margin of a PositiveDefinite ``verdict``.
    """
    if verdict is not None:
        if verdict.regime != Regime.POSITIVE_DEFINITE:
            raise UsageError("monotonicity probe needs a PositiveDefinite regime")
        if eps is None:
            eps = verdict.sym_margin
    if eps is None or not eps > 0:
        raise BadParamsError("monotonicity probe needs a positive eps")
    if pairs < 1:
        raise BadParamsError("pairs must be at least 1")
    box = as_box(box, spec.dim)
    rng = np.random.default_rng(seed)
    lo, hi = box[:, 0], box[:, 1]
    A = rng.uniform(lo, hi, size=(pairs, spec.dim))
    B = rng.uniform(lo, hi, size=(pairs, spec.dim))
    bound = 0.5 * eps * (1.0 - 1e-6)
    best = (math.inf, None, None)
    for a, b in zip(A, B):
        d = a - b
        dd = float(d @ d)
        if dd == 0.0:
            continue
        ratio = float((spec(a) - spec(b)) @ d) / dd
        if ratio < best[0]:
            best = (ratio, a, b)
    ratio, a, b = best
    if ratio < bound:
        raise ProbeFailedError(a, b, ratio, bound)
    return ProbeReport(pairs=pairs, eps=eps, bound=bound, min_ratio=ratio, worst_pair=(a, b), seed=seed)
