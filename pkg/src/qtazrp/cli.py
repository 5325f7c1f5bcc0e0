"""Command line interface: ``qtazrp <command> [options]``.

Exit codes: 0 success, 1 usage or validation error, 2 numerical failure.
Results go to stdout (or ``--output``) as JSON or CSV; timing goes to stderr
so that stdout depends on the flags alone.
"""
import argparse
import csv
import io
import json
import logging
import math
import sys
import time

import numpy as np

from . import identities
from ._accel import backend_name, configure_threads
from .contour import DEFAULT_BUDGET, ContourSpec
from .errors import (
    ContourPlacementError,
    ConvergenceError,
    CostBudgetError,
    NumericalQualityError,
    OverflowGuardError,
    QtazrpError,
    StateError,
)
from .leftmost import leftmost_cdf_distribution, leftmost_distribution, leftmost_tail_bound
from .oracle import (
    build_generator,
    gillespie_ensemble,
    map_from_exclusion,
    map_to_exclusion,
    master_solve,
    state_counts,
    variant_ensemble,
)
from .qcalc import QParameter
from .states import ZrpState
from .transition import TransitionQuery, checked_probability, distribution_at_time, evaluate_transition

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
TAIL_TOL = 1e-14
COMPARE_TOL = 1e-8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------


def parse_q(text):
    """``"0.5"``, ``"0.3+0.2i"``, ``"0.5i"`` -> :class:`QParameter`."""
    try:
        value = complex(text.strip().replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise UsageError(f"cannot parse q = {text!r}; use a real number or a+bi") from exc
    try:
        return QParameter(value)
    except (StateError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def parse_state(text):
    try:
        return ZrpState.parse(text)
    except StateError as exc:
        raise UsageError(str(exc)) from exc


def parse_sites(text):
    """``"3"``, ``"1,4,6"`` or ``"0:10"`` (inclusive range)."""
    try:
        if ":" in text:
            a, b = text.split(":")
            return list(range(int(a), int(b) + 1))
        return [int(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise UsageError(f"cannot parse sites {text!r}") from exc


def _stochastic(q):
    if not q.is_stochastic:
        raise UsageError(f"q = {q.value} has no probabilistic meaning here; use a real q in (0, 1)")
    return q


def _contour(args, q):
    r = q.r_max / 2 if args.r == "auto" else float(args.r)
    M = None if args.M == "auto" else int(args.M)
    return ContourSpec(r, M, q)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if not math.isfinite(v):
        return "null"
    return format(v, ".17g")


def to_json(obj):
    """JSON text with every float written to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, int, float, np.bool_, np.integer, np.floating)):
        return _num(obj)
    return json.dumps(str(obj))


def _cell(v):
    if isinstance(v, (bool, int, float, np.bool_, np.integer, np.floating)):
        return _num(v)
    if isinstance(v, (list, tuple, dict)):
        return to_json(v)
    return "" if v is None else str(v)


def render(command, summary, rows, fmt, lines=False):
    """Serialize one command result.

    JSON: a single object (``rows`` nested) or, with ``lines``, one object per
    row. CSV: one line per row, summary fields repeated as columns.
    """
    head = {"schema_version": SCHEMA_VERSION, "command": command}
    if fmt == "json":
        if lines:
            return "".join(to_json({**head, **row}) + "\n" for row in rows)
        return to_json({**head, **summary, "rows": rows}) + "\n"
    records = [{**head, **row, **summary} for row in rows] or [{**head, **summary}]
    fields = list(dict.fromkeys(k for rec in records for k in rec))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for rec in records:
        writer.writerow([_cell(rec.get(k)) for k in fields])
    return buf.getvalue()


def _state_fields(prefix, state):
    return {prefix: str(state), f"{prefix}_occupancy": state.occupancy_form()}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_transition(args):
    q = _stochastic(parse_q(args.q))
    Y, X = parse_state(args.y), parse_state(args.x)
    if len(X) != len(Y):
        raise UsageError("--x and --y need the same number of particles")
    query = TransitionQuery(Y, X, args.t, _contour(args, q))
    res = evaluate_transition(query, tol=args.tol, budget=args.budget, rtol=args.rtol)
    summary = {
        "q": q.value, **_state_fields("Y", Y), **_state_fields("X", X), "t": args.t,
        "probability": res.probability, "imag": res.imag, "M": res.M, "delta": res.delta,
        "r": query.contour.r, "backend": backend_name(),
    }
    return summary, [], EXIT_OK


def _tail_sites(Y, x_max, t):
    x = x_max + 1
    while leftmost_tail_bound(Y, x, t) > TAIL_TOL:
        x += 1
    return x


def _q_fields(q):
    if q.is_real:
        return {"q": q.value}
    return {"q_re": q.complex.real, "q_im": q.complex.imag}


def cmd_leftmost(args):
    q = parse_q(args.q)
    Y = parse_state(args.y)
    xs = parse_sites(args.x)
    contour = _contour(args, q)
    if args.method == "determinant" and not Y.is_step():
        raise UsageError("--method determinant needs step initial data (all particles on one site)")
    probabilistic = q.is_stochastic
    if args.method == "determinant":
        res = leftmost_cdf_distribution(Y.positions[0], len(Y), [*xs, *(x + 1 for x in xs)], args.t,
                                        contour=contour, tol=args.tol, budget=args.budget,
                                        rtol=args.rtol)
        k = len(xs)
        cdf, cdf_next = res.raw[:k], res.raw[k:]
        pmf = cdf - cdf_next
        tail = 0.0
    else:
        hi = _tail_sites(Y, max(xs), args.t) if probabilistic else max(xs)
        grid_x = np.arange(min(xs), hi + 1)
        res = leftmost_distribution(Y, grid_x, args.t, contour=contour, tol=args.tol,
                                    budget=args.budget, rtol=args.rtol)
        tails = np.cumsum(res.raw[::-1])[::-1]
        pos = {int(x): i for i, x in enumerate(grid_x)}
        pmf = np.array([res.raw[pos[x]] for x in xs])
        cdf = np.array([tails[pos[x]] for x in xs])
        tail = leftmost_tail_bound(Y, hi + 1, args.t)
    rows = []
    for x, p, c in zip(xs, pmf, cdf):
        row = {"x": x}
        if probabilistic:
            row["pmf"] = checked_probability(p, f"pmf at {x}")
            row["cdf"] = checked_probability(c, f"P(x_N >= {x})")
            row["imag"] = max(abs(complex(p).imag), abs(complex(c).imag))
        else:
            row.update({"pmf_re": p.real, "pmf_im": p.imag})
            if args.method == "determinant":
                # the integral route has no finite tail sum to offer here
                row.update({"cdf_re": c.real, "cdf_im": c.imag})
        rows.append(row)
    summary = {
        **_q_fields(q), **_state_fields("Y", Y), "t": args.t, "method": args.method,
        "probabilistic": probabilistic, "M": res.M, "delta": res.delta, "r": contour.r,
        "tail_bound": tail, "backend": backend_name(),
    }
    return summary, rows, EXIT_OK


def cmd_verify(args):
    names = identities.IDENTITY_NAMES if args.identity == "all" else (args.identity,)
    with identities.injected_fault(args.inject_fault):
        reports = identities.run_battery(names, seed=args.seed)
    rows = [r.to_dict() for r in reports]
    code = EXIT_OK if all(r.passed for r in reports) else EXIT_NUMERIC
    return {}, rows, code


def cmd_oracle(args):
    q = _stochastic(parse_q(args.q))
    Y = parse_state(args.y)
    gen = build_generator(Y, args.cutoff, q.value)
    sol = master_solve(gen, args.t, tol=args.tol)
    rows = [
        {**_state_fields("X", s), "probability": p}
        for s, p in zip(sol.states, sol.probabilities)
        if p >= args.min_prob
    ]
    summary = {
        "q": q.value, **_state_fields("Y", Y), "t": args.t, "cutoff": args.cutoff,
        "states": len(gen), "deficit": sol.deficit, "poisson_tail": sol.poisson_tail,
        "terms": sol.terms, "partial": sol.partial,
    }
    return summary, rows, EXIT_OK


def cmd_simulate(args):
    q = _stochastic(parse_q(args.q))
    Y = parse_state(args.y)
    if args.variant:
        samples = variant_ensemble(map_to_exclusion(Y), args.t, q.value, args.samples, args.seed)
        counts = state_counts(samples)
        rows = []
        for pos, c in sorted(counts.items()):
            X = map_from_exclusion(pos)
            rows.append({"exclusion": ",".join(map(str, pos)), **_state_fields("X", X),
                         "count": c, "frequency": c / args.samples})
    else:
        samples = gillespie_ensemble(Y, args.t, q.value, args.samples, args.seed)
        counts = state_counts(samples)
        rows = [{**_state_fields("X", ZrpState(pos)), "count": c, "frequency": c / args.samples}
                for pos, c in sorted(counts.items())]
    summary = {"q": q.value, **_state_fields("Y", Y), "t": args.t, "samples": args.samples,
               "seed": args.seed, "variant": args.variant}
    return summary, rows, EXIT_OK


def cmd_compare(args):
    q = _stochastic(parse_q(args.q))
    Y = parse_state(args.y) if args.y else ZrpState((0,) * args.n)
    contour = _contour(args, q)
    dist = distribution_at_time(Y, args.t, contour, args.cutoff, tol=args.tol, budget=args.budget,
                                rtol=args.rtol)
    sol = master_solve(build_generator(Y, args.cutoff, q.value), args.t)
    master = sol.as_dict()
    counts = state_counts(gillespie_ensemble(Y, args.t, q.value, args.samples, args.seed)) if args.samples else {}
    rows, max_quad, max_z = [], 0.0, 0.0
    for s, p in zip(dist.states, dist.probabilities):
        m = master.get(s, 0.0)
        row = {**_state_fields("X", s), "quadrature": p, "master": m, "abs_diff": abs(p - m)}
        max_quad = max(max_quad, abs(p - m))
        if args.samples:
            f = counts.get(s.positions, 0) / args.samples
            row["monte_carlo"] = f
            if m * args.samples >= 1:
                z = abs(f - m) / math.sqrt(m * (1 - m) / args.samples)
                row["z_score"] = z
                max_z = max(max_z, z)
        if m >= args.min_prob or p >= args.min_prob:
            rows.append(row)
    summary = {
        "q": q.value, **_state_fields("Y", Y), "t": args.t, "cutoff": args.cutoff,
        "M": dist.M, "max_abs_quad_master": max_quad, "max_imag": dist.max_imag,
        "quad_total": dist.total, "master_deficit": sol.deficit,
        "samples": args.samples, "max_z_score": max_z if args.samples else None,
    }
    code = EXIT_OK if max_quad <= COMPARE_TOL else EXIT_NUMERIC
    return summary, rows, code


COMMANDS = {
    "transition": cmd_transition,
    "leftmost": cmd_leftmost,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", help="write results here instead of stdout")
    p.add_argument("--threads", type=int, help="worker threads (default: QTAZRP_NUM_THREADS or all cores)")


def _quadrature(p):
    p.add_argument("--r", default="auto", help='contour radius or "auto" (half of r_max)')
    p.add_argument("--M", default="auto", help='nodes per dimension or "auto" (doubling from 16)')
    p.add_argument("--tol", type=float, default=1e-12, help="absolute node-doubling tolerance")
    p.add_argument("--rtol", type=float, default=0.0, help="relative node-doubling tolerance")
    p.add_argument("--budget", type=float, default=DEFAULT_BUDGET, help="max node tuples M^N")


def build_parser():
    parser = _Parser(prog="qtazrp", description="Exact finite-N q-TAZRP probabilities and their checks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("transition", help="P_Y(X; t) from the contour formula")
    p.add_argument("--q", required=True)
    p.add_argument("--y", required=True, help="initial state, left-most first, e.g. 0,0,1")
    p.add_argument("--x", required=True, help="final state, left-most first")
    p.add_argument("--t", type=float, required=True)
    _quadrature(p)
    _common(p)

    p = sub.add_parser("leftmost", help="distribution of the left-most particle")
    p.add_argument("--q", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--x", required=True, help='sites: "3", "1,4,6" or "0:10"')
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--method", choices=("integral", "determinant"), default="integral")
    _quadrature(p)
    _common(p)

    p = sub.add_parser("verify", help="run the identity checks (JSON lines)")
    p.add_argument("--identity", choices=("all",) + identities.IDENTITY_NAMES, default="all")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    _common(p)

    p = sub.add_parser("oracle", help="master equation on a truncated state space")
    p.add_argument("--q", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--cutoff", type=int, default=20, help="max total displacement")
    p.add_argument("--tol", type=float, default=1e-14, help="uniformization tail tolerance")
    p.add_argument("--min-prob", type=float, default=0.0)
    _common(p)

    p = sub.add_parser("simulate", help="Gillespie sampling")
    p.add_argument("--q", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", action="store_true", help="run the exclusion image and map back")
    _common(p)

    p = sub.add_parser("compare", help="quadrature vs master equation vs Monte Carlo")
    p.add_argument("--q", required=True)
    p.add_argument("--n", type=int, default=2, help="step initial data with n particles at 0")
    p.add_argument("--y", help="initial state (overrides --n)")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--cutoff", type=int, default=20)
    p.add_argument("--samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-prob", type=float, default=1e-10)
    _quadrature(p)
    _common(p)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be positive")
            configure_threads(args.threads)
        if hasattr(args, "budget"):
            args.budget = int(args.budget)
        start = time.perf_counter()
        summary, rows, code = COMMANDS[args.command](args)
        elapsed = time.perf_counter() - start
    except (UsageError, StateError, ContourPlacementError, OverflowGuardError, CostBudgetError) as exc:
        print(f"qtazrp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalQualityError, ConvergenceError) as exc:
        print(f"qtazrp {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except QtazrpError as exc:  # pragma: no cover - every subclass is listed above
        print(f"qtazrp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(args.command, summary, rows, args.format, lines=args.command == "verify")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"qtazrp {args.command}: {elapsed:.3f} s", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
