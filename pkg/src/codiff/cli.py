"""Config-driven experiment runner.

Subcommands: ``run <config.json>``, ``check <suite>``, ``rate <trace.json>
--fstar <v>``, ``list-problems``.  A run writes the trace as CSV and JSON;
exit status encodes the termination reason (0 stationary, 2 iteration limit,
3 line-search stall; 1 for configuration errors).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .problems import get_problem, registered_names
from .rates import rate_fit
from .solvers import Armijo, ExactScan, McdConfig, Termination, mcd_solve, qrmcd_solve
from .subsolvers import SubsolverConfig, WholeSpace, feasible_set_from_json_obj

EXIT_CODES = {
    Termination.STATIONARY: 0,
    Termination.MAX_ITER: 2,
    Termination.LINE_SEARCH_STALL: 3,
}


class ConfigError(ValueError):
    pass


def _parse_extended(value, default):
    if value is None:
        return default
    if isinstance(value, str):
        if value.lower() in ("inf", "+inf", "infinity"):
            return np.inf
        raise ConfigError(f"expected a number or 'inf', got {value!r}")
    return float(value)


def _parse_line_search(obj):
    if obj is None:
        return ExactScan()
    kind = obj.get("kind", "scan")
    if kind == "scan":
        return ExactScan(
            grid_points=int(obj.get("grid_points", 64)),
            refine_iters=int(obj.get("refine_iters", 40)),
        )
    if kind == "armijo":
        return Armijo(
            sigma=float(obj.get("sigma", 0.1)),
            gamma=float(obj.get("gamma", 0.5)),
            k_max=int(obj.get("k_max", 60)),
        )
    raise ConfigError(f"unknown line search kind {kind!r}")


def _build_run(config: dict):
    if "problem" not in config:
        raise ConfigError("config needs a 'problem' name")
    solver = config.get("solver", "mcd")
    if solver not in ("mcd", "qrmcd"):
        raise ConfigError(f"unknown solver {config.get('solver')!r}")
    try:
        problem = get_problem(config["problem"], **config.get("params", {}))
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc

    cfg = McdConfig(
        nu=_parse_extended(config.get("nu"), np.inf),
        mu=_parse_extended(config.get("mu"), np.inf),
        alpha_star=_parse_extended(config.get("alpha_star"), 10.0),
        max_iter=int(config.get("max_iter", 10_000)),
        stop_tol=float(config.get("stop_tol", 1e-8)),
        line_search=_parse_line_search(config.get("line_search")),
        subsolver=SubsolverConfig(tol=float(config.get("subsolver_tol", 1e-10))),
    )

    if "x0" in config:
        x0 = np.asarray(config["x0"], dtype=float)
        if x0.shape != (problem.dimension,):
            raise ConfigError("x0 has the wrong dimension")
    else:
        rng = np.random.default_rng(int(config.get("seed", 0)))
        lo, hi = problem.default_box
        x0 = rng.uniform(lo, hi)

    a_set = WholeSpace()
    if config.get("feasible_set") is not None:
        a_set = feasible_set_from_json_obj(config["feasible_set"])
    return problem, solver, cfg, x0, a_set


def run_config(config: dict) -> int:
    """Execute one run config; writes trace files and returns the exit code."""
    problem, solver, cfg, x0, a_set = _build_run(config)
    if solver == "mcd":
        trace = mcd_solve(problem.expr, x0, cfg)
    else:
        trace = qrmcd_solve(problem.expr, x0, a_set, cfg)
    csv_path = config.get("output_csv", "trace.csv")
    json_path = config.get("output_json", "trace.json")
    trace.write_csv(csv_path)
    trace.write_json(json_path)
    print(
        f"{problem.name}: {trace.reason.value} after {len(trace.records)} records, "
        f"f = {trace.final_f:.12g}, measure = {trace.final_omega:.3g}"
    )
    return EXIT_CODES[trace.reason]


def _cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        return run_config(config)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _cmd_rate(args) -> int:
    try:
        with open(args.trace) as fh:
            obj = json.load(fh)
        f_values = [rec["f"] for rec in obj["records"]]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: cannot read trace: {exc}", file=sys.stderr)
        return 1
    report = rate_fit(f_values, args.fstar)
    print(
        json.dumps(
            {
                "c_hat": report.c_hat,
                "c_interval": list(report.c_interval),
                "p_hat": report.p_hat,
                "window": report.window,
                "verdict": report.verdict,
            }
        )
    )
    return 0


def _cmd_list(args) -> int:
    for name in registered_names():
        print(name)
    return 0


def _cmd_check(args) -> int:
    from .acceptance import run_suite, suite_names

    if args.suite not in suite_names():
        print(f"error: unknown suite {args.suite!r}; available: {', '.join(suite_names())}",
              file=sys.stderr)
        return 1
    passed, failed = run_suite(args.suite)
    print(f"{passed} passed, {failed} failed")
    return 0 if failed == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="codiff", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a solver from a JSON config")
    p_run.add_argument("config")
    p_run.set_defaults(func=_cmd_run)

    p_check = sub.add_parser("check", help="run a named acceptance suite")
    p_check.add_argument("suite")
    p_check.set_defaults(func=_cmd_check)

    p_rate = sub.add_parser("rate", help="fit a convergence rate to a trace")
    p_rate.add_argument("trace")
    p_rate.add_argument("--fstar", type=float, required=True)
    p_rate.set_defaults(func=_cmd_rate)

    p_list = sub.add_parser("list-problems", help="list registered problems")
    p_list.set_defaults(func=_cmd_list)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
