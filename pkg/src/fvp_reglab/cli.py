"""Command-line front end.

Exit codes: 0 success, 2 usage or problem-file error, 3 numerical domain
failure (domain violation, parameter overflow, no bracket, quadrature or
bound failure).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .errors import RegLabError
from .evolution import SourceTerm, manufacture_problem
from .experiments import (
    DEFAULT_DELTAS,
    NoiseSpec,
    compare_methods,
    perturb_data,
    run_convergence_study,
    write_rows_csv,
)
from .problemfile import ProblemFileError, dump_problem, load_problem, parse_mode, parse_source_condition
from .regularization import (
    choose_alpha_lavrentiev,
    choose_beta_exponential,
    choose_beta_general,
    lavrentiev_bound,
    lavrentiev_solution,
    stability_bound,
    total_bound,
    truncated_solution,
)
from .spectral import EigenSystem, SpectralVector, make_dirichlet_laplacian

EXIT_USAGE = 2
EXIT_NUMERIC = 3

logger = logging.getLogger("fvp_reglab")


class UsageError(Exception):
    pass


def _g(x) -> str:
    return f"{x:.17g}"


def _float_list(text):
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _seeds(text):
    text = str(text)
    if "," in text:
        return [int(v) for v in text.split(",") if v.strip()]
    n = int(text)
    if n < 1:
        raise UsageError("--seeds needs a positive count or a comma-separated list")
    return list(range(n))


def _jobs(value):
    if value is not None:
        return max(1, value)
    env = os.environ.get("FVP_REGLAB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"FVP_REGLAB_JOBS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


# make-problem ================================================================
def _initial_state(spec: str, eig: EigenSystem, tau: float) -> SpectralVector:
    kind, _, arg = spec.partition(":")
    lam = eig.eigenvalues
    try:
        if kind == "mode":
            j = int(arg)
            if not 1 <= j <= len(eig):
                raise UsageError(f"--u0 mode index must lie in 1..{len(eig)}")
            return eig.basis(j - 1)
        if kind == "decay":
            return SpectralVector(eig, np.exp(-float(arg) * lam))
        if kind == "smooth":
            # unit-norm profile in the range of e^{-gamma tau A}
            return SpectralVector(eig, np.exp(-float(arg) * tau * lam) / np.sqrt(len(eig)))
        if kind == "coeffs":
            return SpectralVector(eig, _float_list(arg))
    except ValueError as exc:
        raise UsageError(f"bad --u0 {spec!r}: {exc}") from None
    raise UsageError(f"unknown --u0 {spec!r}; use mode:J, decay:R, smooth:GAMMA or coeffs:a,b,...")


def _source(spec: str, eig: EigenSystem) -> SourceTerm:
    n = len(eig)
    if spec == "zero":
        return SourceTerm.zero(n)
    if spec.startswith("decaying:"):
        try:
            c = float(spec.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad --source {spec!r}") from None
        return SourceTerm.exponential(np.full(n, c), -eig.eigenvalues)
    try:
        return SourceTerm((parse_mode(spec),) * n)
    except ValueError as exc:
        raise UsageError(f"bad --source: {exc}") from None


def cmd_make_problem(args) -> int:
    if args.laplacian is not None:
        try:
            eig = make_dirichlet_laplacian(args.laplacian)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    else:
        try:
            eig = EigenSystem(_float_list(args.eigenvalues))
        except ValueError as exc:
            raise UsageError(f"bad --eigenvalues: {exc}") from None
    if not args.tau > 0:
        raise UsageError("--tau must be positive")
    if args.source_condition:
        try:
            parse_source_condition(args.source_condition)
        except ValueError as exc:
            raise UsageError(f"bad --source-condition: {exc}") from None
    u0 = _initial_state(args.u0, eig, args.tau)
    problem = manufacture_problem(eig, args.tau, u0, _source(args.source, eig))
    noise = {}
    if args.delta is not None:
        noise = {"delta": args.delta, "split": args.split, "seed": args.seed}
    text = dump_problem(problem, args.source_condition, noise)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}: {len(eig)} modes, tau={_g(args.tau)}")
    return 0


# solve =======================================================================
def _noise_setting(args, spec):
    delta = args.delta if args.delta is not None else spec.noise.get("delta", 0.0)
    split = args.split if args.split is not None else spec.noise.get("split", 0.5)
    seed = args.seed if args.seed is not None else int(spec.noise.get("seed", 0))
    if delta < 0:
        raise UsageError("--delta must be non-negative")
    return float(delta), float(split), int(seed)


def cmd_solve(args) -> int:
    spec = load_problem(args.problem)
    problem = spec.problem
    t = args.t
    if not 0 <= t < problem.tau:
        raise UsageError(f"--t must lie in [0, tau) = [0, {_g(problem.tau)})")
    delta, split, seed = _noise_setting(args, spec)
    sc = spec.condition_at(t)

    if args.auto:
        if sc is None:
            raise UsageError("--auto needs a source_condition in the problem file")
        if delta <= 0:
            raise UsageError("--auto needs a positive --delta")
        if args.method == "truncation":
            if sc.family == "exp" and delta < 1:
                param = choose_beta_exponential(sc.gamma, t, problem.tau, delta)
                rule = "closed form log(1/delta)/((gamma+1)(tau-t))"
            else:
                param = choose_beta_general(sc, t, problem.tau, delta)
                rule = "h_t(beta) e^{(tau-t)beta} = rho/delta"
        else:
            if sc.family != "exp":
                raise UsageError("--auto for lavrentiev needs an exp source condition")
            param = choose_alpha_lavrentiev(sc.gamma, sc.rho, delta)
            rule = "alpha = (delta/rho)^(1/(min(gamma,1)+1))"
            if sc.gamma > 1:
                print(f"# saturation: gamma={_g(sc.gamma)} clamped to 1")
    else:
        param = args.beta if args.method == "truncation" else args.alpha
        if param is None:
            flag = "--beta" if args.method == "truncation" else "--alpha"
            raise UsageError(f"{args.method} needs {flag} or --auto")
        if not param > 0:
            raise UsageError("regularization parameter must be positive")
        rule = "given"

    data = problem
    if delta > 0:
        phi, f = perturb_data(problem, NoiseSpec(delta, split, seed))
        data = problem.with_data(phi, f)

    if args.method == "truncation":
        u = truncated_solution(data, t, param)
        if sc is not None:
            bound = total_bound(sc, param, t, problem.tau, delta)
            bound_name = "rho_t/h_t(beta) + e^{(tau-t)beta} delta"
        else:
            bound = stability_bound(param, t, problem.tau, delta) if delta > 0 else None
            bound_name = "e^{(tau-t)beta} delta (noise part)"
        pname = "beta"
    else:
        u = lavrentiev_solution(data, t, param)
        if sc is not None and sc.family == "exp":
            bound = lavrentiev_bound(sc.rho, sc.gamma, param, delta)
            bound_name = "rho_t alpha^min(gamma,1) + delta/alpha"
        else:
            bound = delta / param if delta > 0 else None
            bound_name = "delta/alpha (noise part)"
        pname = "alpha"

    print(f"# problem {spec.path} t={_g(t)} tau={_g(problem.tau)} method={args.method}")
    print(f"# {pname}={_g(param)} ({rule}) delta={_g(delta)} split={_g(split)} seed={seed}")
    truth = problem.truth(t) if problem.truth is not None else None
    header = "mode\tlambda\tcoefficient" + ("\ttruth" if truth is not None else "")
    print(header)
    for i, lam in enumerate(problem.eigensystem.eigenvalues):
        row = f"{i + 1}\t{_g(lam)}\t{_g(u.coefficients[i])}"
        if truth is not None:
            row += f"\t{_g(truth.coefficients[i])}"
        print(row)
    if truth is not None:
        print(f"error\t{_g((u - truth).norm())}")
    if bound is not None:
        print(f"bound\t{_g(bound)}\t# {bound_name}")
    return 0


# study / compare =============================================================
def _study_inputs(args):
    spec = load_problem(args.problem)
    if spec.problem.truth is None:
        raise UsageError("studies need a problem with u0 (known truth)")
    if not 0 <= args.t < spec.problem.tau:
        raise UsageError(f"--t must lie in [0, tau) = [0, {_g(spec.problem.tau)})")
    sc = spec.condition_at(args.t)
    if sc is None:
        raise UsageError("studies need a source_condition in the problem file")
    deltas = _float_list(args.deltas) if args.deltas else list(DEFAULT_DELTAS)
    if not deltas or any(not d > 0 for d in deltas):
        raise UsageError("--deltas must be positive")
    split = args.split if args.split is not None else spec.noise.get("split", 0.5)
    return spec, sc, deltas, _seeds(args.seeds), float(split)


def cmd_study(args) -> int:
    spec, sc, deltas, seeds, split = _study_inputs(args)
    if args.method == "lavrentiev" and sc.family != "exp":
        raise UsageError("lavrentiev studies need an exp source condition")
    report = run_convergence_study(spec.problem, sc, args.method, deltas, seeds, args.t,
                                   split, jobs=_jobs(args.jobs))
    report.write_csv(args.out + ".csv")
    report.write_json(args.out + ".json")
    if report.info.get("gamma_clamped"):
        print(f"# saturation: gamma={_g(sc.gamma)} clamped to 1")
    slope = "undefined" if report.slope is None else _g(report.slope)
    print(f"{args.method} slope {slope}")
    print(f"wrote {args.out}.csv {args.out}.json")
    return 0


def cmd_compare(args) -> int:
    spec, sc, deltas, seeds, split = _study_inputs(args)
    if sc.family != "exp":
        raise UsageError("compare needs an exp source condition")
    cmp = compare_methods(spec.problem, sc, deltas, seeds, args.t, split, jobs=_jobs(args.jobs))
    write_rows_csv(args.out + ".csv", cmp.rows)
    with open(args.out + ".json", "w") as fh:
        json.dump(cmp.summary(), fh, indent=2)
    for rep in (cmp.truncation, cmp.lavrentiev):
        slope = "undefined" if rep.slope is None else _g(rep.slope)
        print(f"{rep.method} slope {slope}")
    print(cmp.verdict())
    print(f"wrote {args.out}.csv {args.out}.json")
    return 0


# parser ======================================================================
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fvp-reglab",
        description="Regularized backward solves of u' + Au = f, u(tau) = phi_tau.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    mk = sub.add_parser("make-problem", help="write a manufactured problem file")
    eg = mk.add_mutually_exclusive_group(required=True)
    eg.add_argument("--laplacian", type=int, metavar="N", help="Dirichlet Laplacian, eigenvalues k^2")
    eg.add_argument("--eigenvalues", metavar="L1,L2,...")
    mk.add_argument("--tau", type=float, required=True)
    mk.add_argument("--u0", default="mode:1",
                    help="mode:J | decay:R (e^{-R lam}) | smooth:GAMMA | coeffs:a,b,...")
    mk.add_argument("--source", default="zero",
                    help="zero | decaying:C | a mode entry such as 'const 0.5' for every mode")
    mk.add_argument("--source-condition", help="e.g. 'exp gamma=2 rho=auto'")
    mk.add_argument("--delta", type=float, help="default noise level stored in the file")
    mk.add_argument("--split", type=float, default=0.5)
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--out", default="-", help="output path, '-' for stdout")
    mk.set_defaults(func=cmd_make_problem)

    sv = sub.add_parser("solve", help="regularized solution at one time")
    sv.add_argument("problem")
    sv.add_argument("--t", type=float, default=0.0)
    sv.add_argument("--method", choices=("truncation", "lavrentiev"), default="truncation")
    pg = sv.add_mutually_exclusive_group()
    pg.add_argument("--beta", type=float)
    pg.add_argument("--alpha", type=float)
    pg.add_argument("--auto", action="store_true", help="a-priori parameter from the source condition")
    sv.add_argument("--delta", type=float)
    sv.add_argument("--split", type=float)
    sv.add_argument("--seed", type=int)
    sv.set_defaults(func=cmd_solve)

    for name, func, hlp in (("study", cmd_study, "convergence-rate study"),
                            ("compare", cmd_compare, "truncation vs Lavrentiev on shared seeds")):
        st = sub.add_parser(name, help=hlp)
        st.add_argument("problem")
        if name == "study":
            st.add_argument("--method", choices=("truncation", "lavrentiev"), default="truncation")
        st.add_argument("--deltas", help="comma-separated noise levels (default 1e-1..1e-6, 6 points)")
        st.add_argument("--seeds", default="10", help="count N (seeds 0..N-1) or a comma list")
        st.add_argument("--t", type=float, default=0.0)
        st.add_argument("--split", type=float)
        st.add_argument("--out", required=True, help="output prefix for .csv and .json")
        st.add_argument("--jobs", type=int, help="worker threads (env FVP_REGLAB_JOBS)")
        st.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RegLabError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
