"""Command-line front end.

    injcert corpus list
    injcert certify --map rotation90 --box "-1,1;-1,1" --grid 5 --eps 0.1
    injcert merit   --map cubic1d --x1 0 --x2 1
    injcert mpass   --map cubic1d --x1 0 --x2 1 --nodes 64 --out t.json
    injcert collide --map "[x1^2, x2]" --box "-2,2;-2,2" --starts 32
    injcert invert  --map sin_perturbed1d --y 2.4546

Exit codes: 0 for any completed run (Violated and NotFound are answers),
2 for usage errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .certify import Regime, Status, certify_box, monotonicity_probe
from .collide import find_collision, newton_invert
from .errors import InjcertError, NumericalError, ProbeFailedError, UsageError
from .maps import BUILTIN_IDS, get_builtin, map_from_expr
from .merit import eval_J, isolated_zero_radius, make_merit, ring_level
from .mountainpass import deform, init_path, ps_diagnostics

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

VECTOR_GRAMMAR = 'comma-separated reals, e.g. "1,-2.5"'
BOX_GRAMMAR = 'semicolon-separated "lo,hi" pairs per axis, e.g. "-1,1;-2,2"'
MATRIX_GRAMMAR = 'row-major rows separated by semicolons, e.g. "1,-3;3,1"'


class CliUsageError(UsageError):
    pass


# ---------------------------------------------------------------------------
# value grammars


def _reals(text: str, flag: str, grammar: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise CliUsageError(f"{flag}: cannot parse {text!r}; expected {grammar}") from None
    if not all(math.isfinite(v) for v in vals):
        raise CliUsageError(f"{flag}: values must be finite")
    return vals


def parse_vector(text: str, flag: str = "vector") -> np.ndarray:
    return np.array(_reals(text.strip(), flag, VECTOR_GRAMMAR))


def parse_rows(text: str, flag: str, grammar: str) -> list[list[float]]:
    return [_reals(row.strip(), flag, grammar) for row in text.strip().split(";")]


def parse_box(text: str, flag: str = "--box") -> list:
    rows = parse_rows(text, flag, BOX_GRAMMAR)
    if any(len(r) != 2 for r in rows):
        raise CliUsageError(f"{flag}: each axis needs exactly two numbers; expected {BOX_GRAMMAR}")
    return rows


def parse_matrix(text: str, flag: str = "--matrix") -> list:
    rows = parse_rows(text, flag, MATRIX_GRAMMAR)
    if len({len(r) for r in rows}) != 1:
        raise CliUsageError(f"{flag}: rows have different lengths; expected {MATRIX_GRAMMAR}")
    return rows


def _param_value(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def resolve_map(args):
    """Return ``(MapSpec, description dict)`` from --map/--expr/--matrix/--param."""
    params = {}
    for item in args.param or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise CliUsageError(f"--param: expected name=value, got {item!r}")
        params[key.strip()] = _param_value(value.strip())
    if args.matrix is not None:
        params["matrix"] = parse_matrix(args.matrix)
    source = args.expr if args.expr is not None else args.map
    if source is None:
        raise CliUsageError("one of --map or --expr is required (--map takes a builtin id or an expression)")
    if args.expr is not None and args.map is not None:
        raise CliUsageError("--map and --expr are mutually exclusive")
    if args.expr is not None or source.lstrip().startswith("["):
        if params:
            raise CliUsageError("--param/--matrix apply to builtin maps only")
        spec = map_from_expr(source)
        return spec, {"expr": spec.name, "dim": spec.dim}
    if args.matrix is not None and source != "linear":
        raise CliUsageError("--matrix applies to the linear map only")
    entry = get_builtin(source, **params)
    return entry.spec, {"id": entry.id, "params": entry.summary()["params"], "dim": entry.spec.dim}


def _point(text, spec, flag):
    if text is None:
        return None
    x = parse_vector(text, flag)
    if x.shape[0] != spec.dim:
        raise CliUsageError(f"{flag}: expected {spec.dim} components, got {x.shape[0]}")
    return x


def _box(text, spec):
    box = parse_box(text)
    if len(box) != spec.dim:
        raise CliUsageError(f"--box: expected {spec.dim} axes, got {len(box)}")
    return box


def _fmt(x) -> str:
    return "(" + ", ".join(f"{v:.10g}" for v in np.asarray(x).reshape(-1)) + ")"


# ---------------------------------------------------------------------------
# subcommands; each returns (result payload, seed, human summary lines)


def cmd_corpus(args):
    entries = [get_builtin(i).summary() for i in BUILTIN_IDS]
    lines = []
    for e in entries:
        lines.append(
            f"{e['id']:<16} dim={e['dim']}  injective={e['injective']:<7} "
            f"det_nonvanishing={e['det_nonvanishing']:<7} collision={e['known_collision']}"
        )
    return {"maps": entries}, None, lines


def cmd_certify(args):
    spec, desc = resolve_map(args)
    box = _box(args.box, spec)
    verdict = certify_box(spec, box, args.grid, args.eps, workers=args.threads)
    result = {"map": desc, "verdict": verdict.to_dict()}
    lines = [
        f"status: {verdict.status.value}",
        f"regime: {verdict.regime.value}",
        f"epsilon_estimate: {verdict.epsilon_estimate:.10g}",
        f"samples: {verdict.samples}",
    ]
    if verdict.witness is not None:
        w = verdict.witness
        lines.append(
            f"witness: x={_fmt(w.x)} min|lambda|={w.min_abs_lambda:.6g} "
            f"sym eigenvalues in [{w.sym_min:.6g}, {w.sym_max:.6g}] det={w.det_jac:.6g}"
        )
    if verdict.failure is not None:
        lines.append(f"failure: {verdict.failure['error']}: {verdict.failure['message']}")
    if args.probe_pairs:
        result["probe"] = _probe(spec, box, verdict, args)
        lines.append(f"monotonicity probe: {result['probe']['status']}")
    if verdict.status == Status.SATISFIED:
        lines.append(f"note: {verdict.wording}")
    return result, args.seed, lines


def _probe(spec, box, verdict, args):
    if verdict.regime == Regime.POSITIVE_DEFINITE:
        target = spec
    elif verdict.regime == Regime.NEGATIVE_DEFINITE:
        target = spec.negated()
    else:
        return {"status": "Skipped", "reason": f"regime {verdict.regime.value} is not definite"}
    if not verdict.sym_margin or verdict.sym_margin <= 0:
        return {"status": "Skipped", "reason": "no positive symmetric-part margin"}
    try:
        rep = monotonicity_probe(target, box, args.probe_pairs, verdict.sym_margin, seed=args.seed)
    except ProbeFailedError as exc:
        return {
            "status": "ProbeFailed",
            "ratio": exc.ratio,
            "bound": exc.bound,
            "a": [float(v) for v in exc.a],
            "b": [float(v) for v in exc.b],
            "seed": args.seed,
        }
    return {"status": "Passed", **rep.to_dict()}


def cmd_merit(args):
    spec, desc = resolve_map(args)
    p = make_merit(spec, _point(args.x1, spec, "--x1"), _point(args.x2, spec, "--x2"))
    r = isolated_zero_radius(p, seed=args.seed)
    rho = args.rho if args.rho is not None else 0.9 * r / math.sqrt(p.dim)
    result = {
        "map": desc,
        "x0": p.x0.tolist(),
        "collision_residual": p.collision_residual,
        "warning": p.warning,
        "J_at_0": eval_J(p, np.zeros(p.dim)),
        "J_at_x0": eval_J(p, p.x0),
        "isolated_zero_radius": r,
        "rho": rho,
    }
    lines = [f"x0 = x2 - x1 = {_fmt(p.x0)}", f"|F(x1) - F(x2)| = {p.collision_residual:.3e}"]
    if p.warning:
        lines.append(f"warning: {p.warning}")
    lines.append(f"isolated-zero radius r = {r:.10g}")
    ring = ring_level(p, rho, seed=args.seed)
    result["alpha"] = ring.alpha
    result["ring_samples"] = ring.samples
    result["ring_argmin"] = ring.argmin.tolist()
    lines.append(f"ring level alpha = {ring.alpha:.10g} at rho = {rho:.10g}")
    return result, args.seed, lines


def cmd_mpass(args):
    spec, desc = resolve_map(args)
    p = make_merit(spec, _point(args.x1, spec, "--x1"), _point(args.x2, spec, "--x2"))
    u0 = _point(args.u0, spec, "--u0")
    u1 = _point(args.u1, spec, "--u1")
    path = init_path(np.zeros(p.dim) if u0 is None else u0, p.x0 if u1 is None else u1, args.nodes)
    out = deform(
        p,
        path,
        max_iters=args.max_iters,
        endpoint_tol=args.endpoint_tol,
        diverge_norm=args.diverge_norm,
        grad_tol=args.grad_tol,
    )
    diag = ps_diagnostics(out.trace, args.regime, eps=args.regime_eps)
    result = {"map": desc, "outcome": out.to_dict(include_trace=True), "ps": diag.to_dict()}
    if p.warning:
        result["warning"] = p.warning
    lines = [
        f"status: {out.status.value}",
        f"c_estimate: {out.c_estimate:.12g}",
        f"x_c: {_fmt(out.x_c)}",
        f"|grad J(x_c)|: {out.grad_norm:.3e}",
        f"iterations: {out.iterations}",
        f"final PS quotient: {diag.final_quotient}",
    ]
    if p.warning:
        lines.append(f"warning: {p.warning}")
    return result, None, lines


def cmd_collide(args):
    spec, desc = resolve_map(args)
    box = _box(args.box, spec)
    res = find_collision(
        spec,
        box,
        args.starts,
        args.tol,
        args.min_sep,
        penalty_weight=args.penalty,
        seed=args.seed,
        workers=args.threads,
    )
    lines = [f"status: {'Found' if res.found else 'NotFound'}"]
    if res.found:
        w = res.witness
        lines.append(f"a = {_fmt(w.a)}")
        lines.append(f"b = {_fmt(w.b)}")
        lines.append(f"|F(a) - F(b)| = {w.residual:.3e}, |a - b| = {w.separation:.6g}")
    else:
        lines.append(f"best residual at separation >= {args.min_sep}: {res.best_residual:.6g}")
    return {"map": desc, "search": res.to_dict()}, args.seed, lines


def cmd_invert(args):
    spec, desc = resolve_map(args)
    y = _point(args.y, spec, "--y")
    x0 = _point(args.x0, spec, "--x0")
    inv = newton_invert(spec, y, x0, tol=args.tol, max_iter=args.max_iter)
    lines = [
        f"x = {_fmt(inv.x)}",
        f"|F(x) - y| = {inv.residual:.3e}",
        f"iterations: {inv.iterations}",
        f"inverse Jacobian: {inv.inv_jacobian.tolist()}",
    ]
    return {"map": desc, "inverse": inv.to_dict()}, None, lines


# ---------------------------------------------------------------------------
# parser


def _add_map_args(sp):
    sp.add_argument("--map", help="builtin id or expression such as '[x1^3 - x1]'")
    sp.add_argument("--expr", help="expression map, e.g. '[x1^2 + x2, x2]'")
    sp.add_argument("--matrix", help=f"matrix for the linear map: {MATRIX_GRAMMAR}")
    sp.add_argument("--param", action="append", metavar="NAME=VALUE", help="builtin parameter (repeatable)")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="injcert", description="Global injectivity toolkit for maps R^n -> R^n.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON run report here")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)

    sp = sub.add_parser("corpus", parents=[common], help="list builtin maps")
    sp.add_argument("action", nargs="?", choices=["list"], default="list")
    sp.set_defaults(func=cmd_corpus)

    sp = sub.add_parser("certify", parents=[common], help="grid check of the spectral hypotheses")
    _add_map_args(sp)
    sp.add_argument("--box", required=True, help=BOX_GRAMMAR)
    sp.add_argument("--grid", type=int, default=21, help="grid points per axis")
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.add_argument("--probe-pairs", type=int, default=0, help="random pairs for the monotonicity probe")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("merit", parents=[common], help="merit function geometry for a pair")
    _add_map_args(sp)
    sp.add_argument("--x1", required=True, help=VECTOR_GRAMMAR)
    sp.add_argument("--x2", required=True, help=VECTOR_GRAMMAR)
    sp.add_argument("--rho", type=float, help="sphere radius (default 0.9 r / sqrt(n))")
    sp.set_defaults(func=cmd_merit)

    sp = sub.add_parser("mpass", parents=[common], help="numerical mountain pass between the two zeros")
    _add_map_args(sp)
    sp.add_argument("--x1", required=True, help=VECTOR_GRAMMAR)
    sp.add_argument("--x2", required=True, help=VECTOR_GRAMMAR)
    sp.add_argument("--u0", help="path start (default origin)")
    sp.add_argument("--u1", help="path end (default x2 - x1)")
    sp.add_argument("--nodes", type=int, default=64)
    sp.add_argument("--max-iters", type=int, default=5000)
    sp.add_argument("--endpoint-tol", type=float, default=1e-8)
    sp.add_argument("--diverge-norm", type=float)
    sp.add_argument("--grad-tol", type=float)
    sp.add_argument("--regime", choices=[r.value for r in Regime], default=Regime.INDETERMINATE.value)
    sp.add_argument("--regime-eps", type=float, help="certified margin for the contradiction check")
    sp.set_defaults(func=cmd_mpass)

    sp = sub.add_parser("collide", parents=[common], help="multi-start collision search")
    _add_map_args(sp)
    sp.add_argument("--box", required=True, help=BOX_GRAMMAR)
    sp.add_argument("--starts", type=int, default=32)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--min-sep", type=float, default=0.1)
    sp.add_argument("--penalty", type=float, default=1.0)
    sp.set_defaults(func=cmd_collide)

    sp = sub.add_parser("invert", parents=[common], help="solve F(x) = y by damped Newton")
    _add_map_args(sp)
    sp.add_argument("--y", required=True, help=VECTOR_GRAMMAR)
    sp.add_argument("--x0", help="initial guess (default origin)")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-iter", type=int, default=100)
    sp.set_defaults(func=cmd_invert)
    return parser


_VALUE_FLAGS = {
    "--map", "--expr", "--matrix", "--param", "--box", "--x1", "--x2", "--u0", "--u1",
    "--y", "--x0", "--rho",
}


def _join_values(argv):
    # "-1,1;-1,1" looks like an option to argparse; glue it to its flag
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    return obj


def run(argv=None, stdout=None, stderr=None) -> tuple[int, dict | None]:
    """Run one command; returns ``(exit_code, report)``."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_values(argv))
    except SystemExit as exc:
        return (EXIT_OK if exc.code == 0 else EXIT_USAGE), None

    t0 = time.perf_counter()
    try:
        result, seed, lines = args.func(args)
    except (UsageError, KeyError) as exc:
        print(f"usage error: {exc}", file=stderr)
        return EXIT_USAGE, None
    except (NumericalError, FloatingPointError, ZeroDivisionError, OverflowError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_NUMERICAL, None
    except InjcertError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_NUMERICAL, None

    inputs = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    report = _clean(
        {
            "tool_version": __version__,
            "command": args.command,
            "seed": seed,
            "inputs": inputs,
            "result": result,
            "wall_time_ms": int(round(1000 * (time.perf_counter() - t0))),
        }
    )
    for line in lines:
        print(line, file=stdout)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                json.dump(report, fh, indent=2)
                fh.write("\n")
        except OSError as exc:
            print(f"usage error: --out: {exc}", file=stderr)
            return EXIT_USAGE, report
    return EXIT_OK, report


def main(argv=None) -> int:
    return run(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
