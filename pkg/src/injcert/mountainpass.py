"""Numerical mountain pass on the merit function J.

A path joining u0 and u1 is stored as a polyline. Its level is the exact
supremum of J along the polyline, not only at the nodes, so the level of
every path is an upper bound for the minimax value

    c = inf over paths l with l(0)=u0, l(1)=u1 of sup_t J(l(t)).

Each iteration moves the highest point of the path (and its two neighbours
at half step) downhill, accepting a move only when J strictly drops on the
touched segments and the path level does not rise. The level therefore never
increases.

Along the way every iteration records a Palais-Smale style trace of the
highest point: J, |grad J|, |x| and the Rayleigh quotient of
``I' + I'^T`` at ``I(x)``. :func:`ps_diagnostics` reads the trace back
against the spectral hypotheses.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from . import spectral
from .certify import Regime
from .errors import (
    BadParamsError,
    DegeneratePathError,
    DimensionMismatchError,
    EmptyTraceError,
    EndpointNotLowError,
    NotACriticalRingError,
)
from .merit import MeritProblem, eval_I, eval_J, grad_J, jac_I

J_FLOOR = 1e-14


class MPStatus(str, Enum):
    CRITICAL_POINT = "CriticalPoint"
    DIVERGING_PS = "DivergingPS"
    MAX_ITERATIONS = "MaxIterations"


@dataclass
class Path:
    nodes: np.ndarray  # (N + 1, n); first and last rows are the fixed endpoints

    @property
    def n_segments(self) -> int:
        return self.nodes.shape[0] - 1

    def spacing(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)


@dataclass(frozen=True)
class PSRecord:
    k: int
    x: np.ndarray
    J: float
    g: float
    norm: float
    rayleigh: float | None
    mu0: float | None = None  # extreme eigenvalues of I' + I'^T at x
    mu1: float | None = None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "x_k": [float(v) for v in self.x],
            "J_k": self.J,
            "g_k": self.g,
            "norm_k": self.norm,
            "rayleigh_k": self.rayleigh,
            "mu0_k": self.mu0,
            "mu1_k": self.mu1,
        }


@dataclass
class PSTrace:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_list(self) -> list:
        return [r.to_dict() for r in self.records]


@dataclass
class MPOutcome:
    status: MPStatus
    c_estimate: float
    x_c: np.ndarray | None
    trace: PSTrace
    iterations: int
    path: Path
    grad_norm: float
    params: dict
    stuck: int = 0
    message: str = ""

    def to_dict(self, include_trace: bool = False) -> dict:
        out = {
            "status": self.status.value,
            "c_estimate": self.c_estimate,
            "x_c": None if self.x_c is None else [float(v) for v in self.x_c],
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "stuck_line_searches": self.stuck,
            "path_nodes": self.path.nodes.shape[0],
            "params": self.params,
            "message": self.message,
        }
        if include_trace:
            out["trace"] = self.trace.to_list()
        return out


def init_path(u0, u1, N: int = 64) -> Path:
    """Straight polyline with N segments from u0 to u1."""
    u0 = np.asarray(u0, dtype=float).reshape(-1)
    u1 = np.asarray(u1, dtype=float).reshape(-1)
    if u0.shape != u1.shape:
        raise DimensionMismatchError(f"endpoints differ in dimension: {u0.shape[0]} vs {u1.shape[0]}")
    if N < 8:
        raise BadParamsError("a path needs at least 8 segments")
    if np.array_equal(u0, u1):
        raise DegeneratePathError("path endpoints coincide")
    t = np.linspace(0.0, 1.0, N + 1)[:, None]
    nodes = u0 + t * (u1 - u0)
    nodes[-1] = u1
    return Path(nodes)


def record_point(p: MeritProblem, x, k: int) -> PSRecord:
    """One trace record at x: J, gradient norm, norm and Rayleigh data."""
    I = eval_I(p, x)
    Ip = jac_I(p, x)
    J = float(I @ I)
    g = float(np.linalg.norm(2.0 * Ip.T @ I))
    ray = mu0 = mu1 = None
    if J > J_FLOOR:
        A = spectral.sym_part(Ip)
        ray = spectral.rayleigh(A, I)
        w = spectral.eig_symmetric(A)
        mu0, mu1 = float(w[-1]), float(w[0])
    return PSRecord(k, np.array(x, dtype=float), J, g, float(np.linalg.norm(x)), ray, mu0, mu1)


class _PolylineState:
    """Node values, gradients and per-segment maxima, refreshed lazily."""

    def __init__(self, p: MeritProblem, nodes: np.ndarray):
        self.p = p
        self.nodes = [np.array(v, dtype=float) for v in nodes]
        self.J = [eval_J(p, v) for v in self.nodes]
        self.G = [grad_J(p, v) for v in self.nodes]
        self.seg = [self._segment_max(i) for i in range(len(self.nodes) - 1)]

    def copy(self) -> "_PolylineState":
        new = object.__new__(_PolylineState)
        new.p = self.p
        new.nodes = list(self.nodes)
        new.J = list(self.J)
        new.G = list(self.G)
        new.seg = list(self.seg)
        return new

    def _segment_max(self, i: int):
        """(J, x, tau) of the maximum of J on segment i."""
        a, b = self.nodes[i], self.nodes[i + 1]
        Ja, Jb = self.J[i], self.J[i + 1]
        best = (Ja, a, 0.0) if Ja >= Jb else (Jb, b, 1.0)
        d = b - a
        da = float(self.G[i] @ d)
        db = float(self.G[i + 1] @ d)
        nd = float(np.linalg.norm(d))
        # require a clear sign change so round-off at a node never spawns a spurious maximum
        if da > 1e-12 * np.linalg.norm(self.G[i]) * nd and db < -1e-12 * np.linalg.norm(self.G[i + 1]) * nd:
            try:
                s = brentq(
                    lambda s: float(grad_J(self.p, a + s * d) @ d), 0.0, 1.0, xtol=1e-16, rtol=1e-15, maxiter=500, disp=False
                )
            except ValueError:
                return best
            x = a + s * d
            Jx = eval_J(self.p, x)
            if Jx > best[0]:
                best = (Jx, x, s)
        return best

    def set_node(self, i: int, x: np.ndarray):
        self.nodes[i] = np.array(x, dtype=float)
        self.J[i] = eval_J(self.p, x)
        self.G[i] = grad_J(self.p, x)
        for s in (i - 1, i):
            if 0 <= s < len(self.seg):
                self.seg[s] = self._segment_max(s)

    def insert_node(self, s: int, x: np.ndarray):
        """Insert x (a point on segment s) as a new node after node s."""
        self.nodes.insert(s + 1, np.array(x, dtype=float))
        self.J.insert(s + 1, eval_J(self.p, x))
        self.G.insert(s + 1, grad_J(self.p, x))
        self.seg[s : s + 1] = [self._segment_max(s), self._segment_max(s + 1)]

    def level(self):
        """(sup J, x, segment index, tau); ties go to the lowest segment."""
        best = None
        for i, (J, x, tau) in enumerate(self.seg):
            if best is None or J > best[0]:
                best = (J, x, i, tau)
        return best


def _respace(state: _PolylineState, m: int, n_segments: int) -> _PolylineState:
    """Arc-length resampling to ``n_segments`` segments that keeps node m in place."""
    nodes = np.array(state.nodes)
    seglen = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seglen)])
    total = arc[-1]
    if total == 0.0:
        return state
    k = int(round(n_segments * arc[m] / total))
    k = min(max(k, 1), n_segments - 1)

    def sample(t0, t1, count):
        ts = np.linspace(t0, t1, count + 1)[1:-1]
        out = []
        for t in ts:
            j = min(int(np.searchsorted(arc, t, side="right")) - 1, len(seglen) - 1)
            frac = 0.0 if seglen[j] == 0 else (t - arc[j]) / seglen[j]
            out.append(nodes[j] + frac * (nodes[j + 1] - nodes[j]))
        return out

    if m == 0 or m == len(nodes) - 1:
        new = [nodes[0], *sample(0.0, total, n_segments), nodes[-1]]
    else:
        new = [nodes[0], *sample(0.0, arc[m], k), nodes[m], *sample(arc[m], total, n_segments - k), nodes[-1]]
    return _PolylineState(state.p, np.array(new))


def deform(
    p: MeritProblem,
    path: Path,
    *,
    step0: float | None = None,
    grad_tol: float | None = None,
    max_iters: int = 5000,
    diverge_norm: float | None = None,
    endpoint_tol: float = 1e-8,
    respace_every: int = 10,
    stable_window: int = 20,
    stable_rtol: float = 1e-9,
    max_halvings: int = 10,
) -> MPOutcome:
    """Lower the highest point of the path until a stopping rule fires.

    Stopping rules, checked each iteration at the highest point x_m:

    * ``DivergingPS``: ``|x_m| > diverge_norm`` with ``|grad J(x_m)| <= 10 grad_tol``;
    * ``CriticalPoint``: ``|grad J(x_m)| <= grad_tol`` and the level has
      moved by less than ``stable_rtol`` (relative) over ``stable_window`` iterations;
    * ``MaxIterations`` otherwise.

    ``grad_tol`` defaults to ``1e-8 (1 + c)`` with c the current level and
    ``diverge_norm`` to ``1e3 (1 + |x0|)``. The endpoints must satisfy
    ``J <= endpoint_tol``.
    """
    nodes = np.asarray(path.nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != p.dim:
        raise DimensionMismatchError(f"path nodes must have dimension {p.dim}")
    if max_iters < 1:
        raise BadParamsError("max_iters must be at least 1")
    if nodes.shape[0] < 9:
        raise BadParamsError("a path needs at least 8 segments")
    for label, u in (("u0", nodes[0]), ("u1", nodes[-1])):
        Ju = eval_J(p, u)
        if Ju > endpoint_tol:
            raise EndpointNotLowError(
                f"J({label}) = {Ju:.3e} exceeds the endpoint tolerance {endpoint_tol:.3e}"
            )
    n_segments = nodes.shape[0] - 1
    h0 = float(np.max(np.linalg.norm(np.diff(nodes, axis=0), axis=1)))
    if diverge_norm is None:
        diverge_norm = 1e3 * (1.0 + float(np.linalg.norm(p.x0)))
    max_step = 0.5 * h0 if step0 is None else float(step0)
    params = {
        "step0": max_step,
        "grad_tol": grad_tol,
        "max_iters": max_iters,
        "diverge_norm": diverge_norm,
        "endpoint_tol": endpoint_tol,
        "nodes": n_segments,
    }

    state = _PolylineState(p, nodes)
    trace = PSTrace()
    history: deque = deque(maxlen=stable_window)
    step = max_step
    stuck = 0
    status = MPStatus.MAX_ITERATIONS
    message = ""
    last = len(state.nodes) - 1
    k = 0
    for k in range(max_iters):
        c, x_m, s, tau = state.level()
        last = len(state.nodes) - 1
        if 0.0 < tau < 1.0:
            # make the highest point a node: snap the nearer interior node, else insert
            i = s if tau < 0.5 else s + 1
            if i in (0, last):
                i = s + 1 if i == 0 else s
            trial = state.copy()
            trial.set_node(i, x_m)
            if trial.level()[0] <= c:
                state = trial
                m = i
            else:
                state.insert_node(s, x_m)
                m = s + 1
            c, x_m = state.J[m], state.nodes[m]
        else:
            m = s if tau == 0.0 else s + 1
        last = len(state.nodes) - 1

        rec = record_point(p, x_m, k)
        trace.records.append(rec)
        history.append(c)
        tol = 1e-8 * (1.0 + c) if grad_tol is None else grad_tol
        stable = len(history) == stable_window and (max(history) - min(history)) <= stable_rtol * max(
            abs(max(history)), 1e-300
        )
        if rec.norm > diverge_norm and rec.g <= 10.0 * tol:
            status = MPStatus.DIVERGING_PS
            message = f"|x_k| = {rec.norm:.6g} exceeds {diverge_norm:.6g} with |grad J| = {rec.g:.3e}"
            break
        if rec.g <= tol and stable:
            status = MPStatus.CRITICAL_POINT
            message = f"|grad J| = {rec.g:.3e} <= {tol:.3e}"
            break
        if rec.g <= tol or m in (0, last):
            # nothing to descend: at a critical point, or the maximum sits on a fixed endpoint
            continue

        accepted = False
        for _ in range(max_halvings + 1):
            trial = state.copy()
            g = state.G[m]
            trial.set_node(m, state.nodes[m] - step * g / np.linalg.norm(g))
            for j in (m - 1, m + 1):
                if 0 < j < last:
                    gj = state.G[j]
                    ngj = np.linalg.norm(gj)
                    if ngj > 0:
                        trial.set_node(j, state.nodes[j] - 0.5 * step * gj / ngj)
            # a tie elsewhere on the path (e.g. a mirror-image peak) may keep the
            # global level at c, so require a strict drop only on the touched segments
            touched = range(max(m - 2, 0), min(m + 2, last))
            if trial.level()[0] <= c and max(trial.seg[i][0] for i in touched) < c:
                state = trial
                accepted = True
                break
            step *= 0.5
        if accepted:
            step = min(2.0 * step, max_step)
        else:
            stuck += 1
            step = max_step
            # long neighbouring segments can rise when the max node moves;
            # split them so the next move is more local (the polyline is unchanged)
            for s_i in (m, m - 1):
                a, b = state.nodes[s_i], state.nodes[s_i + 1]
                if np.linalg.norm(b - a) > h0 / 64:
                    state.insert_node(s_i, 0.5 * (a + b))

        if respace_every and (k + 1) % respace_every == 0:
            c_now, _, s_now, tau_now = state.level()
            m_now = s_now if tau_now < 0.5 else s_now + 1
            trial = _respace(state, m_now, n_segments)
            if trial.level()[0] <= c_now:
                state = trial
        # keep the polyline tame: split segments longer than twice the initial spacing
        i = 0
        while i < len(state.nodes) - 1:
            if np.linalg.norm(state.nodes[i + 1] - state.nodes[i]) > 2.0 * h0:
                trial = state.copy()
                trial.insert_node(i, 0.5 * (state.nodes[i] + state.nodes[i + 1]))
                if trial.level()[0] <= state.level()[0]:
                    state = trial
                    continue
            i += 1

    final = trace.records[-1]
    params["grad_tol_used"] = tol
    if status == MPStatus.MAX_ITERATIONS and not message:
        message = f"stopped after {max_iters} iterations"
        if stuck:
            message += f" ({stuck} stuck line searches)"
    return MPOutcome(
        status=status,
        c_estimate=float(final.J),
        x_c=final.x,
        trace=trace,
        iterations=k + 1,
        path=Path(np.array(state.nodes)),
        grad_norm=final.g,
        params=params,
        stuck=stuck,
        message=message,
    )


# ---------------------------------------------------------------------------
# Palais-Smale diagnostics


@dataclass
class PSReport:
    records_used: int
    quotients: list
    bounds: list
    final_quotient: float | None
    quotient_to_zero: bool
    contradiction: bool
    key4_violations: int
    rayleigh_violations: int
    regime: Regime
    notes: list

    def to_dict(self) -> dict:
        return {
            "records_used": self.records_used,
            "final_quotient": self.final_quotient,
            "quotient_to_zero": self.quotient_to_zero,
            "contradiction": self.contradiction,
            "key4_violations": self.key4_violations,
            "rayleigh_violations": self.rayleigh_violations,
            "regime": self.regime.value,
            "notes": self.notes,
        }


def ps_diagnostics(
    trace,
    regime,
    *,
    eps: float | None = None,
    tol: float = 1e-6,
    zero_tol: float = 1e-3,
) -> PSReport:
    """Read a trace against the Rayleigh-quotient argument.

    For each record with J > 1e-14:

    * ``quotient = 2 I^T I' I / J``, which is the Rayleigh quotient of
      ``I' + I'^T`` at I and so lies between its extreme eigenvalues;
    * ``bound = g sqrt(J) / J`` bounds ``|quotient|`` by Cauchy-Schwarz.

    On a Palais-Smale sequence ``bound -> 0`` forces ``quotient -> 0``. If
    the regime was certified definite with margin ``eps``, the quotient must
    stay beyond ``eps`` in that direction, and a quotient inside the band is
    flagged as a contradiction.
    """
    records = list(getattr(trace, "records", trace))
    if not records:
        raise EmptyTraceError("PS trace is empty")
    regime = Regime(regime)
    quotients, bounds = [], []
    key4 = 0
    ray_bad = 0
    for r in records:
        if not r.J > J_FLOOR or r.rayleigh is None:
            continue
        q = r.rayleigh
        b = r.g * math.sqrt(r.J) / r.J
        quotients.append(q)
        bounds.append(b)
        if abs(q) > b * (1.0 + 1e-9) + 1e-300:
            key4 += 1
        if r.mu0 is not None:
            slack = 1e-9 * (1.0 + abs(r.mu0) + abs(r.mu1))
            if not (r.mu1 - slack <= q <= r.mu0 + slack):
                ray_bad += 1
    notes = []
    final = quotients[-1] if quotients else None
    to_zero = final is not None and abs(final) <= zero_tol
    contradiction = False
    if not quotients:
        notes.append("no record with J > 1e-14; quotient undefined")
    elif eps is not None and regime == Regime.NEGATIVE_DEFINITE:
        contradiction = max(quotients) > -eps + tol
    elif eps is not None and regime == Regime.POSITIVE_DEFINITE:
        contradiction = min(quotients) < eps - tol
    if regime in (Regime.MIXED, Regime.INDETERMINATE):
        notes.append(f"regime {regime.value}: hypotheses not satisfied, no contradiction expected")
    elif eps is None:
        notes.append("no certified margin supplied; contradiction check skipped")
    if contradiction:
        notes.append(
            "CONTRADICTION: a Palais-Smale quotient entered the band excluded by the certified margin"
        )
    return PSReport(
        records_used=len(quotients),
        quotients=quotients,
        bounds=bounds,
        final_quotient=final,
        quotient_to_zero=to_zero,
        contradiction=contradiction,
        key4_violations=key4,
        rayleigh_violations=ray_bad,
        regime=regime,
        notes=notes,
    )


@dataclass(frozen=True)
class SingularityWitness:
    v: np.ndarray
    sigma_min: float
    location: np.ndarray
    kernel_residual: float  # |I'(x_c)^T v|

    def to_dict(self) -> dict:
        return {
            "v": [float(a) for a in self.v],
            "sigma_min": self.sigma_min,
            "location": [float(a) for a in self.location],
            "kernel_residual": self.kernel_residual,
        }


def extract_singularity_witness(p: MeritProblem, x_c) -> SingularityWitness:
    """At a critical point with J > 0, ``v = I / |I|`` nearly annihilates ``I'^T``.

    ``location = x_c + x1`` is where F' itself is (nearly) singular.
    """
    x_c = p.map.point(x_c)
    I = eval_I(p, x_c)
    Ip = jac_I(p, x_c)
    J = float(I @ I)
    g = float(np.linalg.norm(2.0 * Ip.T @ I))
    if not J > 1e-10 or g > 1e-6 * (1.0 + J):
        raise NotACriticalRingError(f"x_c is not a critical point with J > 0 (J = {J:.3e}, |grad J| = {g:.3e})")
    v = I / math.sqrt(J)
    return SingularityWitness(
        v=v,
        sigma_min=spectral.sigma_min(Ip),
        location=x_c + p.x1,
        kernel_residual=float(np.linalg.norm(Ip.T @ v)),
    )
