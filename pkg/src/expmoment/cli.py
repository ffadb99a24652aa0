"""Command-line front end: ``expmoment <command> [options]``.

Every command prints one table (CSV by default, ``--format json`` for a list
of flat objects).  Exit status is 0 on success, 2 for invalid input and 3
when a solver fails to converge.
"""

from __future__ import annotations

import argparse
import configparser
import io
import math
import os
import re
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from . import altmin, curie_weiss, estimators, exponents, strategy_core
from .formats import (
    format_vector,
    parse_cost_table,
    parse_distribution,
    parse_prior,
    parse_range,
    parse_vector,
    read_matrix,
    write_rows,
)
from .probability import tilted_measure

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3
THREADS_ENV = "EXPMOMENT_THREADS"


class InputError(Exception):
    """Malformed arguments or data; maps to exit status 2."""


class NonConvergence(Exception):
    """A solver stopped before meeting its tolerance; exit status 3."""

    def __init__(self, message: str, table: Optional[Table] = None):
        super().__init__(message)
        self.table = table


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]
    # columns holding rates or exponents in nats, rescaled by --bits
    nat_columns: frozenset = field(default_factory=frozenset)
    notes: list[str] = field(default_factory=list)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


# ---------------------------------------------------------------------------
# shared argument helpers
# ---------------------------------------------------------------------------


def _table_from(args) -> strategy_core.FiniteCostTable:
    if args.table and args.cost:
        raise InputError("give either --table or --cost, not both")
    if args.table:
        return parse_cost_table(args.table)
    if args.cost:
        return strategy_core.FiniteCostTable(parse_vector(args.cost))
    raise InputError("a cost table is required (--table PATH or --cost v1,v2,...)")


def _add_table(p: argparse.ArgumentParser):
    p.add_argument("--table", help="CSV cost table, rows = symbols, columns = strategies")
    p.add_argument("--cost", help="inline single cost column, comma separated")


def _add_p(p: argparse.ArgumentParser, name: str = "--p"):
    p.add_argument(name, required=True, dest="p", help="distribution: inline list, file, or -")


def _workers() -> Optional[int]:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise InputError(f"{THREADS_ENV} must be at least 1")
    return n


# ---------------------------------------------------------------------------
# command handlers
# ---------------------------------------------------------------------------


def cmd_tilt(args) -> Table:
    p = parse_distribution(args.p)
    table = _table_from(args)
    tilt = tilted_measure(p, table.column(args.s), args.alpha)
    rows = [(i, p.probs[i], tilt.q.probs[i], tilt.log_z) for i in range(p.alphabet_size)]
    return Table(("symbol", "p", "q", "log_z"), rows)


def cmd_moment(args) -> Table:
    p = parse_distribution(args.p)
    table = _table_from(args)
    idx = range(table.n_strategies) if args.s is None else [args.s]
    rows = [(s, strategy_core.exp_moment(p, table, s, args.alpha)) for s in idx]
    return Table(("strategy", "log_moment"), rows)


def cmd_certify(args) -> Table:
    p = parse_distribution(args.p)
    strategies = None
    if args.code_grid is not None:
        if args.table or args.cost:
            raise InputError("--code-grid replaces --table/--cost")
        table, strategies = strategy_core.code_length_table(p.alphabet_size, args.code_grid)
    else:
        table = _table_from(args)
    s = args.s
    if s is None:
        s, _ = strategy_core.brute_force_optimum(p, table, args.alpha)
    rep = strategy_core.theorem1_certify(p, table, s, args.alpha, tol=args.tol)
    cols = ["strategy", "certified", "q_objective_gap", "log_z", "tilted_q"]
    row = [s, rep.certified, rep.q_objective_gap, rep.log_z, format_vector(rep.tilted_q.probs)]
    if strategies is not None:
        cols.append("strategy_distribution")
        row.append(format_vector(strategies[s]))
    return Table(tuple(cols), [tuple(row)])


def cmd_saddle(args) -> Table:
    p = parse_distribution(args.p)
    table = _table_from(args)
    minmax, maxmin = strategy_core.saddle_gap(p, table, args.alpha, args.grid)
    return Table(("minmax", "maxmin", "gap"), [(minmax, maxmin, minmax - maxmin)])


def cmd_altmin(args) -> Table:
    p = parse_distribution(args.p)
    table = _table_from(args)
    if args.multistart:
        traj, _ = altmin.alt_minimize_multistart(p, table, args.alpha, max_iter=args.max_iter)
    else:
        traj = altmin.alt_minimize_neg_moment(p, table, args.alpha, s0=args.s0, max_iter=args.max_iter)
    rows = [
        (k, s, obj)
        for k, (s, obj) in enumerate(zip(traj.strategy_sequence, traj.objective_sequence))
    ]
    out = Table(("iteration", "strategy_index", "objective"), rows)
    best, best_val = altmin.brute_force_neg_moment(p, table, args.alpha)
    out.notes.append(
        f"brute_force_gap={best_val - traj.final_objective:.12g} brute_force_strategy={best}"
    )
    if not traj.converged:
        raise NonConvergence(f"alternation hit max_iter={args.max_iter}", out)
    return out


def cmd_code_dist(args) -> Table:
    p = parse_distribution(args.p)
    dist, log_moment = estimators.optimal_code_distribution(p, args.alpha)
    rows = [(log_moment, format_vector(dist.probs))]
    return Table(("log_moment", "distribution"), rows, frozenset({"log_moment"}))


def _prior_from(args):
    if args.prior:
        if args.phi_plus is not None or args.phi_minus is not None:
            raise InputError("give either --prior or --phi-plus/--phi-minus")
        return parse_prior(args.prior)
    if args.phi_plus is None or args.phi_minus is None:
        raise InputError("need --prior PATH or both --phi-plus and --phi-minus")
    return estimators.TwoPointPrior(args.phi_plus, args.phi_minus).as_finite()


def cmd_bayes_fixpoint(args) -> Table:
    prior = _prior_from(args)
    cols = ("s", "iterations", "residual", "converged", "log_moment")
    if args.multistart:
        s, runs = estimators.bayes_linear_multistart(prior, args.alpha)
        res = next(r for r in runs if r.s == s)
    else:
        res = estimators.bayes_linear_fixpoint(prior, args.alpha, s0=args.s0, max_iter=args.max_iter)
    lm = estimators.linear_estimator_log_moment(prior, args.alpha, res.s)
    out = Table(cols, [(res.s, res.iterations, res.residual, res.converged, lm)])
    if not res.converged:
        raise NonConvergence(f"fixed point residual {res.residual:.3g} after {res.iterations} steps", out)
    return out


def _family(args) -> estimators.GaussianLocationFamily:
    return estimators.GaussianLocationFamily(args.n, args.sigma2, args.theta)


def cmd_gaussian_moment(args) -> Table:
    fam = _family(args)
    m = estimators.gaussian_sample_mean_moment(fam, args.alpha)
    return Table(("moment", "log_moment"), [(m, math.log(m))])


def cmd_crb_bound(args) -> Table:
    fam = _family(args)
    spec = estimators.gaussian_location_crb(fam, half_width=args.half_width)
    b = estimators.crb_lower_bound(spec, fam.theta, args.alpha)
    exact = (
        math.log(estimators.gaussian_sample_mean_moment(fam, args.alpha))
        if args.alpha < fam.alpha_limit
        else math.inf
    )
    return Table(
        ("bound_log", "argmax_theta_prime", "unbounded", "exact_log"),
        [(b.bound_log, b.argmax_theta_prime, b.unbounded, exact)],
    )


_LAMBDA_KINDS = {
    "shannon": "shannon_entropy",
    "guessing": "guessing_min",
    "rate-distortion": "rate_distortion",
    "distortion-rate": "distortion_rate",
}


def cmd_exponent(args) -> Table:
    p = parse_distribution(args.p)
    kind = _LAMBDA_KINDS[args.kind]
    d = None
    if kind in ("rate_distortion", "distortion_rate"):
        d = read_matrix(args.distortion) if args.distortion else exponents.hamming(p.alphabet_size)
    lam = exponents.LambdaFunctional(kind, R=args.R, D=args.D, d_matrix=d)
    res = exponents.generic_exponent(p, lam, args.alpha)
    gap = math.nan if res.oracle_gap is None else res.oracle_gap
    out = Table(
        ("value", "argmax_q", "iterations", "oracle_gap", "converged"),
        [(res.value, format_vector(res.argmax_q.probs), res.solver_iterations, gap, res.converged)],
        frozenset({"value"}),
    )
    if not res.converged:
        raise NonConvergence("mirror ascent hit its iteration cap", out)
    return out


def cmd_guessing(args) -> Table:
    p = parse_distribution(args.p)
    b = exponents.guessing_exponent_closed(p, args.R, args.alpha)
    theta = math.nan if b.theta_r is None else b.theta_r
    return Table(
        ("value", "phase", "theta_r", "entropy", "escort_entropy"),
        [(b.value, b.phase, theta, b.boundaries[0], b.boundaries[1])],
        frozenset({"value", "entropy", "escort_entropy"}),
    )


def cmd_rd(args) -> Table:
    q = parse_distribution(args.p)
    d = read_matrix(args.distortion) if args.distortion else exponents.hamming(q.alphabet_size)
    if (args.D is None) == (args.R is None):
        raise InputError("give exactly one of --D and --R")
    if args.D is not None:
        R = exponents.rate_distortion(q, d, args.D)
        return Table(("D", "R"), [(args.D, R)], frozenset({"R"}))
    D = exponents.distortion_rate(q, d, args.R)
    return Table(("R", "D"), [(args.R, D)], frozenset({"R"}))


def cmd_two_part(args) -> Table:
    p = parse_distribution(args.p)
    ns = [int(v) for v in parse_vector(args.n)]
    limit = exponents.lossless_exponent(p, args.alpha)
    rows = [(n, exponents.two_part_code_exact_moment(p, args.alpha, n), limit) for n in ns]
    return Table(("n", "normalized_log_moment", "limit"), rows, frozenset({"normalized_log_moment", "limit"}))


def cmd_rem(args) -> Table:
    rows = []
    delta = exponents.bss_distortion_rate(args.R) if 0 < args.R < exponents.LN2 else None
    for a in parse_vector(args.alpha):
        value, crit = exponents.rem_lossy_exponent(args.R, float(a))
        rows.append((args.R, float(a), value, crit, delta))
    return Table(("R", "alpha", "value", "critical_alpha", "delta"), rows, frozenset({"R", "value"}))


def cmd_cw_exponent(args) -> Table:
    params = curie_weiss.CWParams(args.mu, args.alpha)
    pt = curie_weiss.classify_phase(params)
    cols = ["mu", "alpha", "exponent", "dominant_m", "tie", "fixed_points", "phase"]
    row = [args.mu, args.alpha, pt.exponent, pt.dominant_m, pt.tie, format_vector(pt.fixed_points), pt.phase]
    nat = {"exponent"}
    if args.n is not None:
        cols.append("finite_n")
        row.append(curie_weiss.cw_exact_finite_n(params, args.n))
        nat.add("finite_n")
    return Table(tuple(cols), [tuple(row)], frozenset(nat))


def cmd_cw_phase_diagram(args) -> Table:
    pts = curie_weiss.phase_diagram_grid(
        parse_range(args.mu_range), parse_range(args.alpha_range), workers=_workers()
    )
    return Table(curie_weiss.PHASE_COLUMNS, curie_weiss.phase_rows(pts), frozenset({"exponent"}))


def cmd_mc(args) -> Table:
    p = parse_distribution(args.p)
    table = _table_from(args)
    seed = 0 if args.seed is None else args.seed
    est = strategy_core.mc_estimate_exp_moment(p, table, args.s, args.alpha, args.samples, seed)
    exact = math.exp(strategy_core.exp_moment(p, table, args.s, args.alpha))
    return Table(
        ("mean", "std_error", "n_samples", "seed", "exact"),
        [(est.mean, est.std_error, est.n_samples, est.seed, exact)],
    )


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    c.add_argument("--format", choices=("csv", "json"), default="csv")
    c.add_argument("--output", help="write to this file instead of stdout")
    c.add_argument("--bits", action="store_true", help="show rates and exponents in bits")
    c.add_argument("--seed", type=int, help="RNG seed for stochastic commands")
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="expmoment", description="Exponential moments of cost functions.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, handler, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(handler=handler)
        return sp

    sp = add("tilt", cmd_tilt, "tilted measure of P by one cost column")
    _add_p(sp)
    _add_table(sp)
    sp.add_argument("--s", type=int, default=0)
    sp.add_argument("--alpha", type=float, required=True)

    sp = add("moment", cmd_moment, "log exponential moment per strategy")
    _add_p(sp)
    _add_table(sp)
    sp.add_argument("--s", type=int)
    sp.add_argument("--alpha", type=float, required=True)

    sp = add("certify", cmd_certify, "tilted-measure optimality certificate")
    _add_p(sp)
    _add_table(sp)
    sp.add_argument("--code-grid", type=int, help="use code-length costs on an interior grid")
    sp.add_argument("--s", type=int, help="strategy to certify (default: brute-force optimum)")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--tol", type=float, default=strategy_core.CERTIFY_TOL)

    sp = add("saddle", cmd_saddle, "min-max and max-min on a simplex grid")
    _add_p(sp)
    _add_table(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--grid", type=int, default=200)

    sp = add("altmin", cmd_altmin, "alternating minimization trajectory")
    _add_p(sp)
    _add_table(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--s0", type=int, default=0)
    sp.add_argument("--multistart", action="store_true")
    sp.add_argument("--max-iter", type=int, default=1000)

    sp = add("code-dist", cmd_code_dist, "optimal code distribution")
    _add_p(sp)
    sp.add_argument("--alpha", type=float, required=True)

    sp = add("bayes-fixpoint", cmd_bayes_fixpoint, "linear estimator fixed point")
    sp.add_argument("--prior", help="CSV rows y, weight, phi")
    sp.add_argument("--phi-plus", type=float)
    sp.add_argument("--phi-minus", type=float)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--s0", type=float, default=0.0)
    sp.add_argument("--multistart", action="store_true")
    sp.add_argument("--max-iter", type=int, default=10_000)

    for name, handler, help_ in (
        ("gaussian-moment", cmd_gaussian_moment, "exact moment of the Gaussian sample mean"),
        ("crb-bound", cmd_crb_bound, "CRB-based lower bound, Gaussian location family"),
    ):
        sp = add(name, handler, help_)
        sp.add_argument("--n", type=int, required=True)
        sp.add_argument("--sigma2", type=float, default=1.0)
        sp.add_argument("--theta", type=float, default=0.0)
        sp.add_argument("--alpha", type=float, required=True)
        if name == "crb-bound":
            sp.add_argument("--half-width", type=float, default=10.0)

    sp = add("exponent", cmd_exponent, "generic asymptotic exponent")
    _add_p(sp)
    sp.add_argument("--kind", choices=tuple(_LAMBDA_KINDS), default="shannon")
    sp.add_argument("--R", type=float)
    sp.add_argument("--D", type=float)
    sp.add_argument("--distortion", help="CSV distortion matrix (default Hamming)")
    sp.add_argument("--alpha", type=float, required=True)

    sp = add("guessing", cmd_guessing, "closed-form guessing exponent")
    _add_p(sp)
    sp.add_argument("--R", type=float, required=True)
    sp.add_argument("--alpha", type=float, required=True)

    sp = add("rd", cmd_rd, "rate-distortion or distortion-rate value")
    _add_p(sp, "--q")
    sp.add_argument("--distortion")
    sp.add_argument("--D", type=float)
    sp.add_argument("--R", type=float)

    sp = add("two-part", cmd_two_part, "exact two-part code moment by type enumeration")
    _add_p(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--n", required=True, help="block length(s), comma separated")

    sp = add("rem", cmd_rem, "random-code lossy exponent on the binary symmetric source")
    sp.add_argument("--R", type=float, required=True)
    sp.add_argument("--alpha", required=True, help="one or more alphas, comma separated")

    sp = add("cw-exponent", cmd_cw_exponent, "Curie-Weiss magnetization exponent")
    sp.add_argument("--mu", type=float, required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--n", type=int, help="also report the exact finite-n value")

    sp = add("cw-phase-diagram", cmd_cw_phase_diagram, "phase classification on a grid")
    sp.add_argument("--mu-range", required=True, help="lo:hi:steps")
    sp.add_argument("--alpha-range", required=True, help="lo:hi:steps")

    sp = add("mc", cmd_mc, "Monte Carlo estimate of the exponential moment")
    _add_p(sp)
    _add_table(sp)
    sp.add_argument("--s", type=int, default=0)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--samples", type=int, default=100_000)

    sp = sub.add_parser("run-config", help="run experiments from an INI file")
    sp.add_argument("path")
    sp.set_defaults(handler=None)
    return parser


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _emit(table: Table, args, stdout, stderr):
    rows = table.rows
    if args.bits and table.nat_columns:
        scale = [c in table.nat_columns for c in table.columns]
        rows = [
            tuple(v / math.log(2.0) if s and isinstance(v, (int, float)) and not isinstance(v, bool) else v
              for v, s in zip(row, scale))
            for row in rows
        ]
    buf = io.StringIO()
    write_rows(table.columns, rows, args.format, buf)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        stdout.write(buf.getvalue())
    for note in table.notes:
        stderr.write(note + "\n")


def _run_args(args, stdout, stderr) -> int:
    try:
        table = args.handler(args)
    except NonConvergence as exc:
        if exc.table is not None:
            _emit(exc.table, args, stdout, stderr)
        stderr.write(f"expmoment: not converged: {exc}\n")
        return EXIT_NONCONVERGED
    _emit(table, args, stdout, stderr)
    return EXIT_OK


def _guard(fn: Callable[[], int], stderr) -> int:
    try:
        return fn()
    except (InputError, ValueError, IndexError, OSError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        stderr.write(f"expmoment: error: {msg}\n")
        return EXIT_INPUT
    except RuntimeError as exc:
        stderr.write(f"expmoment: not converged: {' '.join(str(exc).split())}\n")
        return EXIT_NONCONVERGED


def _option_names(parser: argparse.ArgumentParser, command: str) -> dict[str, argparse.Action]:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[command]
    out = {}
    for action in sp._actions:
        for opt in action.option_strings:
            if opt.startswith("--") and opt != "--help":
                out[opt[2:]] = action
    return out


def config_to_argv(parser: argparse.ArgumentParser, section: str, items: dict) -> list[str]:
    """Translate one INI section into an argv list; raises InputError."""
    if "command" not in items:
        raise InputError(f"[{section}]: missing command")
    command = items["command"].strip()
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if command not in sub.choices or command == "run-config":
        raise InputError(f"[{section}]: unknown command {command!r}")
    known = _option_names(parser, command)
    argv = [command]
    unknown = []
    for key, value in items.items():
        if key == "command":
            continue
        name = key.replace("_", "-") if key.replace("_", "-") in known else key
        action = known.get(name)
        if action is None:
            unknown.append(key)
            continue
        if isinstance(action, argparse._StoreTrueAction):
            if value.strip().lower() in ("1", "true", "yes", "on"):
                argv.append(f"--{name}")
            elif value.strip().lower() not in ("0", "false", "no", "off"):
                raise InputError(f"[{section}]: {key} expects a boolean")
        else:
            argv.append(f"--{name}={value.strip()}")
    if unknown:
        raise InputError(f"[{section}]: unknown keys: {', '.join(sorted(unknown))}")
    return argv


def run_config(path: str, stdout=None, stderr=None) -> int:
    """Run every section of an INI file in order; stops at the first failure."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr

    def go() -> int:
        cfg = configparser.ConfigParser(interpolation=None)
        cfg.optionxform = str
        with open(path, encoding="utf-8") as fh:
            cfg.read_file(fh)
        parser = build_parser()
        # translate everything first so a bad section fails before any output
        plans = [(name, config_to_argv(parser, name, dict(cfg[name]))) for name in cfg.sections()]
        for _, argv in plans:
            code = _run_args(parser.parse_args(argv), stdout, stderr)
            if code != EXIT_OK:
                return code
        return EXIT_OK

    return _guard(go, stderr)


_NEGATIVE = re.compile(r"^-[\d.]")


def _glue_negative_values(argv: list[str]) -> list[str]:
    """Turn ``--flag -0.9:0.9:37`` into ``--flag=-0.9:0.9:37`` so argparse accepts it."""
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (
            tok.startswith("--")
            and "=" not in tok
            and i + 1 < len(argv)
            and _NEGATIVE.match(argv[i + 1])
        ):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = _glue_negative_values(list(sys.argv[1:] if argv is None else argv))

    def go() -> int:
        parser = build_parser()
        if any(a in ("-h", "--help") for a in argv):
            # help goes to stdout and is not an input error
            try:
                parser.parse_args(argv)
            except SystemExit:
                pass
            return EXIT_OK
        args = parser.parse_args(argv)
        if args.command == "run-config":
            return run_config(args.path, stdout, stderr)
        return _run_args(args, stdout, stderr)

    return _guard(go, stderr)


if __name__ == "__main__":
    sys.exit(main())
