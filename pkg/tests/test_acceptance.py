"""Acceptance suite: one pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the "acceptance criteria" section of the terminal summary.
"""
import math
import sys
import time

import numpy as np
import pytest

from fvp_reglab.cli import main as cli_main
from fvp_reglab.evolution import ModeFunction, SourceTerm, bochner_quadrature, manufacture_problem
from fvp_reglab.experiments import (
    DEFAULT_DELTAS,
    DEFAULT_SEEDS,
    NoiseSpec,
    compare_methods,
    l1_time_norm,
    make_smooth_problem,
    perturb_data,
    run_convergence_study,
)
from fvp_reglab.regularization import (
    beta_alpha_correspondence,
    choose_beta_exponential,
    choose_beta_general,
    SourceCondition,
    stability_bound,
    tail_rho,
    truncated_solution,
)
from fvp_reglab.spectral import EigenSystem, SpectralVector, make_dirichlet_laplacian


@pytest.fixture(scope="module")
def rate_problems():
    # dense spectrum relative to the beta range: 64 modes, short horizon
    lap = make_dirichlet_laplacian(64)
    return {g: make_smooth_problem(lap, 0.005, g) for g in (2.0, 0.5)}


@pytest.fixture(scope="module")
def comparisons(rate_problems):
    return {g: compare_methods(p, sc, DEFAULT_DELTAS, DEFAULT_SEEDS) for g, (p, sc) in rate_problems.items()}


def test_criterion_1_exact_recovery(acceptance):
    start = time.perf_counter()
    es = EigenSystem([1.0])
    p = manufacture_problem(es, 1.0, SpectralVector(es, [1.0]))
    errs = [abs(truncated_solution(p, 0.0, b).coefficients[0] - 1.0) for b in (1.0, 1.5, 10.0, 600.0)]
    elapsed = time.perf_counter() - start
    ok = max(errs) <= 1e-12 and elapsed < 1.0
    acceptance(1, "exact single-mode recovery", ok, f"max error {max(errs):.3g}, {elapsed:.3f}s")


def test_criterion_2_stability_bound(acceptance):
    start = time.perf_counter()
    lap = make_dirichlet_laplacian(12)
    p = manufacture_problem(lap, 1.0, SpectralVector(lap, 1.0 / np.arange(1, 13) ** 2),
                            SourceTerm.constant(np.full(12, 0.3)))
    splits = np.random.default_rng(2024).uniform(0.0, 1.0, 200)
    violations, worst, budget_err = 0, 0.0, 0.0
    for delta in (1e-2, 1e-4):
        for seed in range(200):
            phi, f = perturb_data(p, NoiseSpec(delta, float(splits[seed]), seed))
            budget = (phi - p.phi_tau).norm() + l1_time_norm(p.source, f, p.tau)
            budget_err = max(budget_err, abs(budget - delta) / delta)
            noisy = p.with_data(phi, f)
            for beta in (1.0, 4.0, 9.0):
                diff = (truncated_solution(p, 0.0, beta) - truncated_solution(noisy, 0.0, beta)).norm()
                bound = stability_bound(beta, 0.0, p.tau, delta)
                worst = max(worst, diff / bound)
                violations += diff > bound
    elapsed = time.perf_counter() - start
    ok = violations == 0 and budget_err <= 1e-12 and elapsed < 5.0
    acceptance(2, "stability bound over 1200 perturbed solves", ok,
               f"{violations} violations, max ratio {worst:.3f}, budget rel err {budget_err:.1e}, {elapsed:.2f}s")


def test_criterion_3_error_bound_chain(acceptance):
    start = time.perf_counter()
    lap = make_dirichlet_laplacian(32)
    source = SourceTerm.exponential(np.full(32, 0.5), -lap.eigenvalues)
    p, sc = make_smooth_problem(lap, 0.01, 1.0, source=source)
    u = p.truth(0.0)
    failures, tightest = 0, 0.0
    for beta in np.geomspace(0.5, 2048.0, 40):
        measured = (truncated_solution(p, 0.0, beta) - u).norm()
        h = math.exp(float(sc.log_h(beta, 0.0, p.tau)))
        sharp = tail_rho(p, 0.0, beta, sc) / h
        coarse = sc.rho / h
        failures += not (measured <= sharp + 1e-10 and sharp <= coarse + 1e-10)
        if sharp > 0:
            tightest = max(tightest, measured / sharp)
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 5.0
    acceptance(3, "error <= tail_rho/h <= rho/h on a 40-step ladder", ok,
               f"{failures} failures, max error/sharp {tightest:.3f}, {elapsed:.2f}s")


def test_criterion_4_parameter_rules_agree(acceptance):
    worst = 0.0
    for gamma in (0.5, 1.0, 2.0):
        sc = SourceCondition.exponential(gamma, 1.0)
        for delta in np.geomspace(1e-2, 1e-6, 5):
            general = choose_beta_general(sc, 0.0, 1.0, delta)
            closed = choose_beta_exponential(gamma, 0.0, 1.0, delta)
            worst = max(worst, abs(general - closed) / closed)
    acceptance(4, "general parameter equation matches closed form", worst <= 1e-10,
               f"max rel diff {worst:.2e}")


def test_criterion_5_truncation_rate(acceptance, comparisons):
    start = time.perf_counter()
    rep = comparisons[2.0].truncation
    rep.check_bounds(atol=1e-14)
    ok = 0.57 <= rep.slope <= 0.77 and len(rep.rows) == 60
    # the study is shared with criterion 6; time a fresh run here
    p, sc = make_smooth_problem(make_dirichlet_laplacian(64), 0.005, 2.0)
    run_convergence_study(p, sc, "truncation", DEFAULT_DELTAS, DEFAULT_SEEDS)
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 30.0
    acceptance(5, "truncation rate for gamma=2 in [0.57, 0.77]", ok,
               f"slope {rep.slope:.4f}, residual {rep.residual:.3f}, {elapsed:.2f}s")


def test_criterion_6_saturation(acceptance, comparisons):
    hi, lo = comparisons[2.0], comparisons[0.5]
    lav = hi.lavrentiev.slope
    ok = (0.40 <= lav <= 0.60 and hi.slope_gap >= 0.08 and abs(lo.slope_gap) <= 0.10
          and hi.lavrentiev.info["gamma_clamped"])
    acceptance(6, "Lavrentiev saturates at 1/2 while truncation does not", ok,
               f"gamma=2: lavrentiev {lav:.4f}, gap {hi.slope_gap:.4f}; "
               f"gamma=0.5: truncation {lo.truncation.slope:.4f}, lavrentiev {lo.lavrentiev.slope:.4f}, "
               f"gap {lo.slope_gap:+.4f}")


def test_criterion_7_correspondence(acceptance):
    worst = 0.0
    for alpha in (math.exp(-1), math.exp(-2), math.exp(-4)):
        for t, tau in ((0.0, 1.0), (0.25, 0.5), (1.0, 3.0)):
            for delta in (1e-2, 1e-5):
                beta = beta_alpha_correspondence(alpha, t, tau)
                got = stability_bound(beta, t, tau, delta)
                worst = max(worst, abs(got - delta / alpha) / (delta / alpha))
    acceptance(7, "stability bound at corresponding beta equals delta/alpha", worst <= 1e-12,
               f"max rel diff {worst:.2e}")


def _closed_const(c, lam, a, b):
    return c * (1.0 - math.exp(-lam * (b - a))) / lam


def _closed_exp(c, mu, lam, a, b):
    k = lam + mu
    return c * (math.exp(mu * b) - math.exp(mu * a - lam * (b - a))) / k


def test_criterion_8_quadrature(acceptance):
    lam, a, b = 2.0, 0.0, 1.0
    exact = ((np.exp(3j) - math.exp(-2)) / (2 + 3j)).real  # int_0^1 e^{-2(1-s)} cos(3s) ds
    errs = []
    for n in (41, 81, 161, 321):
        s = np.linspace(a, b, n)
        mode = ModeFunction.sampled(np.cos(3 * s), 1.0 / (n - 1))
        errs.append(abs(bochner_quadrature(mode, lam, a, b, rtol=1e-2) - exact))
    ratios = [e0 / e1 for e0, e1 in zip(errs, errs[1:])]

    worst = 0.0
    for lam_, a_, b_ in ((0.5, 0.0, 1.0), (7.0, 0.2, 0.9), (100.0, 0.0, 0.3)):
        for c in (1.0, -2.5):
            got = bochner_quadrature(ModeFunction.constant(c), lam_, a_, b_)
            want = _closed_const(c, lam_, a_, b_)
            worst = max(worst, abs(got - want) / abs(want))
            for mu in (-lam_, 1.5, -0.3):
                got = bochner_quadrature(ModeFunction.exponential(c, mu), lam_, a_, b_)
                want = _closed_exp(c, mu, lam_, a_, b_) if lam_ + mu else c * math.exp(mu * b_) * (b_ - a_)
                worst = max(worst, abs(got - want) / abs(want))
    ok = min(ratios) >= 3.5 and worst <= 1e-13
    acceptance(8, "trapezoid order and closed-form modes", ok,
               f"halving ratios {', '.join(f'{r:.3f}' for r in ratios)}; closed-form max rel err {worst:.1e}")


def test_criterion_9_cli_round_trip(acceptance, tmp_path, capsys):
    path = tmp_path / "p.yaml"
    rc_make = cli_main(["make-problem", "--laplacian", "8", "--tau", "0.1", "--u0", "decay:0.5",
                        "--source", "const 0.25", "--out", str(path)])
    capsys.readouterr()
    rc_solve = cli_main(["solve", str(path), "--beta", "64", "--delta", "0"])
    out = capsys.readouterr().out
    error = float(next(l for l in out.splitlines() if l.startswith("error\t")).split("\t")[1])

    bad = tmp_path / "bad.yaml"
    bad.write_text("eigensystem: {dirichlet_laplacian: 8}\ntau: 0.1\nphi_tau: [1.0, 2.0]\nsource: zero\n")
    rc_bad = cli_main(["solve", str(bad), "--beta", "64"])
    err = capsys.readouterr().err
    ok = rc_make == 0 and rc_solve == 0 and error <= 1e-9 and rc_bad == 2 and f"{bad}:3:" in err
    acceptance(9, "CLI round trip and line-numbered diagnostics", ok,
               f"error {error:.2e}, exit codes {rc_make}/{rc_solve}/{rc_bad}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
