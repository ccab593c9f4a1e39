"""Command-line harness: problem checks, bounds, solver runs and sweeps.

Subcommands
-----------
check          validate a JSON problem file (exit 0 valid, 1 invalid, 2 parse error)
bound          print a descent-step bound / exact scalar threshold as JSON
solve          run one method and emit its trace CSV
sweep          run a method x k x tau grid, one trace CSV per cell + summary
scalar-region  tabulate the exact scalar thresholds over a b grid

Problems come from a file (--problem), the scalar triple (--scalar b,h,m),
or the builtin generators (--random nu,nsigma,nf,norm / --helmholtz n,kt,delta).
Synthetic data uses sigma_ex = 10 and initial guess 12 per component, unless
overridden; all randomness is seeded, and rerunning a command with the same
seed reproduces byte-identical output.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bounds, scalar, spectral
from .linear_model import (RealInverseProblem, ScalarProblem, exact_state,
                           cost, gradient, helmholtz_toy, load_problem,
                           random_contraction, validate)
from .solvers import (MethodSpec, SolverConfig, SolverKind, Status, run_method)

EXIT_INVALID = 1
EXIT_PARSE = 2

METHOD_NAMES = {
    "gd": SolverKind.USUAL_GD,
    "sgd": SolverKind.SHIFTED_GD,
    "kshot": SolverKind.K_STEP,
    "skshot": SolverKind.SHIFTED_K_STEP,
}


def _json_value(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def _dump_json(obj) -> str:
    return json.dumps(obj, default=_json_value)


def _parse_scalar(text: str) -> ScalarProblem:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError("--scalar expects b,h,m")
    return ScalarProblem(b=parts[0], h=parts[1], m=parts[2])


def _load_problem_arg(args) -> RealInverseProblem:
    if getattr(args, "problem", None):
        problem = load_problem(args.problem)
        if not isinstance(problem, RealInverseProblem):
            from .linear_model import realify
            problem = realify(problem)
        return problem
    if getattr(args, "scalar", None):
        return _parse_scalar(args.scalar).as_problem()
    if getattr(args, "random", None):
        nu, ns, nf, norm = args.random.split(",")
        return random_contraction(int(nu), int(ns), int(nf), float(norm),
                                  seed=args.seed)
    if getattr(args, "helmholtz", None):
        n, kt, delta = args.helmholtz.split(",")
        return helmholtz_toy(int(n), float(kt), float(delta), seed=args.seed)
    raise ValueError("no problem source given")


def _synthetic_data(problem, args):
    """Exact parameter, measurement and initial guess for a solver run."""
    sigma_ex = np.full(problem.n_sigma, args.sigma_ex)
    sigma0 = np.full(problem.n_sigma, args.sigma0)
    f = problem.H @ exact_state(problem, sigma_ex)
    return sigma_ex, sigma0, f


def _line_search_tau(problem, f, sigma0, tau, shrink=0.5, armijo=1e-4,
                     max_backtracks=30) -> float:
    """Backtracking line search on the first step, with direct solves."""
    j0 = cost(problem, sigma0, f)
    g = gradient(problem, sigma0, f)
    g2 = float(g @ g)
    if g2 == 0.0:
        return tau
    t = tau
    for _ in range(max_backtracks):
        if cost(problem, sigma0 - t * g, f) <= j0 - armijo * t * g2:
            break
        t *= shrink
    return t


def _cmd_check(args) -> int:
    try:
        problem = load_problem(args.problem)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: cannot read problem file: {exc}", file=sys.stderr)
        return EXIT_PARSE
    report = validate(problem, eps_rho=args.eps_rho, eps_inj=args.eps_inj)
    print(_dump_json(report.as_dict()))
    return 0 if report.is_valid else EXIT_INVALID


def _cmd_bound(args) -> int:
    kind = METHOD_NAMES[args.method]
    if args.scalar:
        sp = _parse_scalar(args.scalar)
        hm2 = sp.h**2 * sp.m**2
        if kind is SolverKind.USUAL_GD:
            value, branch = scalar.usual_gd_threshold(sp.b), "gd"
        elif kind is SolverKind.SHIFTED_GD:
            value, branch = scalar.shifted_gd_threshold(sp.b), "sgd"
        elif kind is SolverKind.K_STEP:
            thr = scalar.eta(args.k, sp.b)
            value, branch = thr.value, thr.branch
        else:
            thr = scalar.kappa(args.k, sp.b)
            value, branch = thr.value, thr.branch
        print(_dump_json({"b": sp.b, "h": sp.h, "m": sp.m, "k": args.k,
                          "method": args.method, "value": value / hm2,
                          "branch": branch}))
        return 0
    try:
        problem = _load_problem_arg(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    params = None
    if args.theta0 is not None or args.delta0 is not None:
        shifted = kind is SolverKind.SHIFTED_K_STEP
        defaults = bounds.default_params(shifted, args.k)
        params = bounds.BoundParams(
            theta0=args.theta0 if args.theta0 is not None else defaults.theta0,
            delta0=args.delta0 if args.delta0 is not None else defaults.delta0)
    try:
        sb = bounds.matrix_bound(problem, MethodSpec(kind, k=args.k), params)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(_dump_json(sb.as_dict()))
    return 0


def _trace_path(out_dir: Path, method: str, k: int, tau: float) -> Path:
    return out_dir / f"trace_{method}_k{k}_tau{tau:.17g}.csv"


def _cmd_solve(args) -> int:
    try:
        problem = _load_problem_arg(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    kind = METHOD_NAMES[args.method]
    sigma_ex, sigma0, f = _synthetic_data(problem, args)
    tau = args.tau[0]
    if args.line_search_first:
        tau = _line_search_tau(problem, f, sigma0, tau)
    config = SolverConfig(tau=tau, max_outer=args.max_outer)
    trace = run_method(MethodSpec(kind, k=args.k), problem, f, sigma0, config,
                       sigma_exact=sigma_ex)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = _trace_path(out_dir, args.method, args.k, tau)
        with open(path, "w") as fh:
            trace.write_csv(fh)
        print(f"{path}")
    else:
        trace.write_csv(sys.stdout)
    return 0


def _run_cell(problem, f, sigma0, sigma_ex, method_name, k, tau, args):
    kind = METHOD_NAMES[method_name]
    used_tau = tau
    if args.line_search_first:
        used_tau = _line_search_tau(problem, f, sigma0, tau)
    method = MethodSpec(kind, k=k)
    try:
        config = SolverConfig(tau=used_tau, max_outer=args.max_outer)
        trace = run_method(method, problem, f, sigma0, config,
                           sigma_exact=sigma_ex)
        status = trace.status.value
        outer = len(trace)
        final_cost = trace.final_cost
    except Exception as exc:  # a failed cell must not kill the sweep
        trace, status, outer, final_cost = None, f"error:{exc}", 0, math.nan
    try:
        rho = spectral.spectral_radius(
            spectral.build_iteration_matrix(problem, method, used_tau))
    except Exception:
        rho = math.nan
    return method_name, k, tau, trace, status, outer, final_cost, rho


def _cmd_sweep(args) -> int:
    try:
        problem = _load_problem_arg(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    sigma_ex, sigma0, f = _synthetic_data(problem, args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    methods = args.method.split(",")
    ks = [int(x) for x in args.k.split(",")]
    taus = [float(x) for x in args.tau.split(",")]
    cells = [(m, k, tau) for m in methods for k in ks for tau in taus]

    with ThreadPoolExecutor() as pool:
        results = list(pool.map(
            lambda c: _run_cell(problem, f, sigma0, sigma_ex, *c, args), cells))

    results.sort(key=lambda r: (r[0], r[1], r[2]))
    with open(out_dir / "summary.csv", "w") as fh:
        fh.write("method,k,tau,status,outer_iters,final_cost,rho\n")
        for method_name, k, tau, trace, status, outer, final_cost, rho in results:
            if trace is not None:
                with open(_trace_path(out_dir, method_name, k, tau), "w") as tf:
                    trace.write_csv(tf)
            fh.write(f"{method_name},{k},{tau:.17g},{status},{outer},"
                     f"{final_cost:.17g},{rho:.17g}\n")
    print(str(out_dir / "summary.csv"))
    return 0


def _cmd_scalar_region(args) -> int:
    ks = [int(x) for x in args.k.split(",")]
    bs = np.linspace(args.b_min, args.b_max, args.b_count)
    if args.b_min <= -1.0 or args.b_max >= 1.0:
        print("error: the b grid must stay inside (-1, 1)", file=sys.stderr)
        return EXIT_PARSE
    methods = args.method.split(",") if args.method else list(METHOD_NAMES)
    lines = ["b,k,method,threshold,branch"]
    for b in bs:
        b = float(b)
        for name in methods:
            kind = METHOD_NAMES[name]
            if kind is SolverKind.USUAL_GD:
                # GD rows carry k = 0: no inner iterations to speak of
                lines.append(f"{b:.17g},0,gd,{scalar.usual_gd_threshold(b):.17g},gd")
            elif kind is SolverKind.SHIFTED_GD:
                lines.append(f"{b:.17g},0,sgd,{scalar.shifted_gd_threshold(b):.17g},sgd")
            elif kind is SolverKind.K_STEP:
                for k in ks:
                    thr = scalar.eta(k, b)
                    val = "inf" if math.isinf(thr.value) else f"{thr.value:.17g}"
                    lines.append(f"{b:.17g},{k},kshot,{val},{thr.branch}")
            else:
                for k in ks:
                    thr = scalar.kappa(k, b)
                    val = "inf" if math.isinf(thr.value) else f"{thr.value:.17g}"
                    lines.append(f"{b:.17g},{k},skshot,{val},{thr.branch}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def _add_problem_sources(p: argparse.ArgumentParser, scalar_ok=True) -> None:
    p.add_argument("--problem", help="JSON problem file")
    if scalar_ok:
        p.add_argument("--scalar", help="scalar triple b,h,m")
    p.add_argument("--random", help="random contraction nu,nsigma,nf,norm")
    p.add_argument("--helmholtz", help="Helmholtz toy grid_n,wavenumber,delta")
    p.add_argument("--seed", type=int, default=0, help="generator seed")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sigma-ex", dest="sigma_ex", type=float, default=10.0,
                   help="exact parameter value per component")
    p.add_argument("--sigma0", type=float, default=12.0,
                   help="initial guess per component")
    p.add_argument("--max-outer", dest="max_outer", type=int, default=2000)
    p.add_argument("--line-search-first", action="store_true",
                   help="backtracking line search on the first step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oneshot",
        description="multi-step one-shot inversion: checks, bounds, sweeps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate a problem file")
    p.add_argument("--problem", required=True)
    p.add_argument("--eps-rho", dest="eps_rho", type=float, default=1e-8)
    p.add_argument("--eps-inj", dest="eps_inj", type=float, default=1e-10)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("bound", help="descent-step bound / scalar threshold")
    _add_problem_sources(p)
    p.add_argument("--method", choices=sorted(METHOD_NAMES), required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--theta0", type=float, default=None)
    p.add_argument("--delta0", type=float, default=None)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("solve", help="run one method, emit trace CSV")
    _add_problem_sources(p)
    p.add_argument("--method", choices=sorted(METHOD_NAMES), required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--tau", type=lambda s: [float(x) for x in s.split(",")],
                   required=True, help="descent step (first value used)")
    p.add_argument("--out", help="output directory (default: CSV to stdout)")
    _add_run_options(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="method x k x tau grid with summary")
    _add_problem_sources(p)
    p.add_argument("--method", required=True,
                   help="comma list from gd,sgd,kshot,skshot")
    p.add_argument("--k", default="1", help="comma list of inner counts")
    p.add_argument("--tau", required=True, help="comma list of steps")
    p.add_argument("--out", required=True, help="output directory")
    _add_run_options(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("scalar-region",
                       help="exact scalar thresholds over a b grid")
    p.add_argument("--k", default="1", help="comma list of inner counts")
    p.add_argument("--b-min", dest="b_min", type=float, default=-0.95)
    p.add_argument("--b-max", dest="b_max", type=float, default=0.95)
    p.add_argument("--b-count", dest="b_count", type=int, default=39)
    p.add_argument("--method", default=None,
                   help="comma list from gd,sgd,kshot,skshot (default all)")
    p.add_argument("--out", help="output CSV file (default: stdout)")
    p.set_defaults(func=_cmd_scalar_region)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
