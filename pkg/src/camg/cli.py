"""Command-line front end.

Every command is a pure function of its flags. With ``--out`` the result is
written to disk together with ``<out>.manifest.json`` holding the parameters,
tool version, wall-clock duration and SHA-256 of each output file; without it
the result goes to stdout.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from camg import __version__
from camg.core import ConfigError, StrategyProfile, make_config
from camg.equilibrium import solve_coaction, sweep, threshold_scan
from camg.large_n import a_star_table, b_max
from camg.markov import build_transition_matrix
from camg.payoff import NumericError, payoff_report
from camg.simulate import simulate, summary

EXIT_INVALID = 2
EXIT_NUMERIC = 3

SWEEP_COLUMNS = "lambda,p_1..p_N,W_1..W_N,w_avg,eta,converged,phase_<i>_<N-i> for i=2..M"
THRESHOLD_COLUMNS = ["lambda_c", "pair_i", "pair_n_minus_i", "label", "bracket_lo", "bracket_hi"]
LARGE_N_COLUMNS = ["b", "lambda", "a_star", "bracket", "w_e2", "random_baseline", "beats_random"]


def _profile_arg(text: str) -> StrategyProfile:
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"profile must be comma-separated reals: {text!r}") from exc
    try:
        return StrategyProfile(tuple(values))
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _emit(args, outputs: dict[str, str], started: float) -> None:
    """Write ``{suffix: text}`` next to ``args.out`` (or print it) plus the manifest."""
    if args.out is None:
        for text in outputs.values():
            sys.stdout.write(text)
        return
    base = Path(args.out)
    base.parent.mkdir(parents=True, exist_ok=True)
    files = {}
    for suffix, text in outputs.items():
        path = base if suffix == "" else base.with_name(base.name + suffix)
        data = text.encode("utf-8")
        path.write_bytes(data)
        files[path.name] = hashlib.sha256(data).hexdigest()
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    params = {k: (",".join(map(str, v.probs)) if isinstance(v, StrategyProfile) else v) for k, v in params.items()}
    manifest = {
        "command": args.command,
        "parameters": params,
        "version": __version__,
        "outputs": files,
        "duration_seconds": round(time.perf_counter() - started, 3),
    }
    base.with_name(base.name + ".manifest.json").write_text(_json_text(manifest), encoding="utf-8")


def cmd_payoff(args) -> dict[str, str]:
    config = make_config(args.n, args.lam, args.tol, args.grid)
    profile = args.profile
    profile.check(config)
    report = payoff_report(profile, config).to_dict()
    report.update({"n_agents": args.n, "lambda": args.lam, "profile": list(profile.probs)})
    if args.dump_matrix:
        report["transition_matrix"] = build_transition_matrix(profile).tolist()
    return {"": _json_text(report)}


def cmd_solve(args) -> dict[str, str]:
    config = make_config(args.n, args.lam, args.tol, args.grid)
    return {"": _json_text(solve_coaction(config).to_dict())}


def cmd_sweep(args) -> dict[str, str]:
    make_config(args.n, args.lambda_from, args.tol, args.grid)
    make_config(args.n, args.lambda_to, args.tol, args.grid)
    if args.steps < 1:
        raise ConfigError("steps must be >= 1")
    lams = np.linspace(args.lambda_from, args.lambda_to, args.steps)
    sols = sweep(args.n, lams, args.tol, args.grid)
    n = args.n
    pairs = [pp.pair for pp in sols[0].phases if pp.pair[0] > 1]
    header = (
        ["lambda"]
        + [f"p_{i}" for i in range(1, n + 1)]
        + [f"W_{i}" for i in range(1, n + 1)]
        + ["w_avg", "eta", "converged"]
        + [f"phase_{i}_{j}" for i, j in pairs]
    )
    rows = []
    for s in sols:
        rows.append(
            [s.discount, *s.profile.probs, *s.payoffs, s.w_avg, s.eta, s.converged]
            + [s.phase_of(i).value for i, _ in pairs]
        )
    return {"": _csv_text(header, rows)}


def cmd_thresholds(args) -> dict[str, str]:
    make_config(args.n, 0.0, args.tol, args.grid)
    found = threshold_scan(
        args.n, step=args.step, resolution=args.resolution, tol=args.tol, grid=args.grid
    )
    rows = [[t.lam, t.pair[0], t.pair[1], t.transition, t.bracket[0], t.bracket[1]] for t in found]
    return {"": _csv_text(THRESHOLD_COLUMNS, rows)}


def cmd_simulate(args) -> dict[str, str]:
    lam = 0.0 if args.lam is None else args.lam
    config = make_config(args.n, lam, args.tol, args.grid)
    if args.profile is not None:
        profile = args.profile
    else:
        profile = solve_coaction(config).profile
    profile.check(config)
    if args.days < 1:
        raise ConfigError("days must be >= 1")
    record = simulate(profile, config, args.days, args.seed)
    rows = [[d, a] for d, a in enumerate(record.attendance.tolist())]
    info = summary(record) if args.days > 1 else {"seed": record.seed, "generator": record.generator}
    return {".csv": _csv_text(["day", "attendance"], rows), ".json": _json_text(info)}


def cmd_large_n(args) -> dict[str, str]:
    if args.b_from < 0 or args.b_to < args.b_from:
        raise ConfigError("need 0 <= b-from <= b-to")
    if args.m < 1 or args.steps < 1:
        raise ConfigError("m and steps must be >= 1")
    bs = np.linspace(args.b_from, args.b_to, args.steps)
    rows = [[r[c] for c in LARGE_N_COLUMNS] for r in a_star_table(bs, args.m)]
    return {"": _csv_text(LARGE_N_COLUMNS, rows)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help="output file (stdout when omitted)"):
        p.add_argument("--out", default=None, help=out_help)
        p.add_argument("--tol", type=float, default=1e-10, help="solver tolerance (default 1e-10)")
        p.add_argument("--grid", type=int, default=2001, help="scan grid size (default 2001)")

    p = sub.add_parser("payoff", help="discounted payoffs of a given profile (JSON)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--profile", type=_profile_arg, required=True, help="p_1,...,p_N")
    p.add_argument("--dump-matrix", action="store_true", help="include the transition matrix")
    common(p)
    p.set_defaults(func=cmd_payoff)

    p = sub.add_parser("solve", help="co-action equilibrium at one lambda (JSON)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help=f"equilibria over a lambda grid (CSV: {SWEEP_COLUMNS})")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lambda-from", type=float, default=0.0)
    p.add_argument("--lambda-to", type=float, default=0.99)
    p.add_argument("--steps", type=int, default=100, help="number of lambda values")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("thresholds", help=f"phase thresholds (CSV: {','.join(THRESHOLD_COLUMNS)})")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--step", type=float, default=0.01, help="coarse lambda step")
    p.add_argument("--resolution", type=float, default=1e-4, help="bisection resolution (default 1e-4)")
    common(p)
    p.set_defaults(func=cmd_thresholds)

    p = sub.add_parser("simulate", help="Monte Carlo run (CSV day,attendance plus JSON summary)")
    p.add_argument("--n", type=int, required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--lambda", dest="lam", type=float, help="simulate the equilibrium at this lambda")
    src.add_argument("--profile", type=_profile_arg, help="p_1,...,p_N")
    p.add_argument("--days", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    common(p, "output stem; writes <stem>.csv and <stem>.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("large-n", help=f"optimal a*(b) table (CSV: {','.join(LARGE_N_COLUMNS)})")
    p.add_argument("--b-from", type=float, default=0.0)
    p.add_argument("--b-to", type=float, default=None, help="default b_max")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--out", default=None, help="output file (stdout when omitted)")
    p.set_defaults(func=cmd_large_n)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "large-n" and args.b_to is None:
        args.b_to = b_max()
    started = time.perf_counter()
    try:
        outputs = args.func(args)
    except ConfigError as exc:
        print(f"camg: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"camg: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(args, outputs, started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
