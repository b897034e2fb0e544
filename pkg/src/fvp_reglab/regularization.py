"""Truncated spectral and Lavrentiev regularization of the backward problem.

Both regularizers act on the data functional ``psi(t)``:

* truncation keeps ``e^{(tau-t) lam_n} psi_n`` for ``lam_n <= beta`` and
  zeroes the rest;
* Lavrentiev solves ``(e^{-(tau-t)A} + alpha I) u = psi``, i.e. divides
  each mode by ``e^{-(tau-t) lam_n} + alpha``.

The error bounds are written for a source condition
``||h_t(A) u(t)|| <= rho_t`` with ``h_t`` positive and increasing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainViolation, NoBracket, ParameterOverflow
from .evolution import FinalValueProblem, accumulate_psi
from .spectral import LOG_THRESHOLD, ScalarSymbol, SpectralVector, apply_calculus

__all__ = [
    "SourceCondition",
    "RegChoice",
    "truncated_solution",
    "lavrentiev_solution",
    "solve",
    "stability_bound",
    "truncation_error_bound",
    "tail_rho",
    "total_bound",
    "lavrentiev_bound",
    "choose_beta_general",
    "choose_beta_exponential",
    "choose_beta_power_of_delta",
    "choose_alpha_lavrentiev",
    "beta_alpha_correspondence",
    "source_condition_norm",
]

logger = logging.getLogger(__name__)

BISECTION_RTOL = 1e-12
BISECTION_MAXITER = 200

_LADDER = np.geomspace(2.0**-10, 2.0**20, 31)


def _span(t, tau):
    s = float(tau) - float(t)
    if not s > 0:
        raise ValueError(f"need t < tau, got t={t}, tau={tau}")
    return s


@dataclass(frozen=True, eq=False)
class SourceCondition:
    """Smoothness assumption ``||h_t(A) u(t)|| <= rho``.

    Families:

    ``power``
        ``h_t(lam) = lam**p``
    ``exp``
        ``h_t(lam) = exp(gamma * (tau - t) * lam)``, equivalently
        ``u(t)`` in the range of ``e^{-gamma (tau-t) A}``
    ``general``
        ``h_t(lam) = fn(lam)`` for a positive increasing callable
    """

    family: str
    rho: float
    p: Optional[float] = None
    gamma: Optional[float] = None
    fn: Optional[Callable] = None
    log_fn: Optional[Callable] = None

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.family == "power":
            if self.p is None or not self.p > 0:
                raise ValueError("power source condition needs p > 0")
        elif self.family == "exp":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("exponential source condition needs gamma > 0")
        elif self.family == "general":
            if self.fn is None:
                raise ValueError("general source condition needs a callable")
            with np.errstate(over="ignore"):
                h = np.asarray(self.fn(_LADDER), dtype=float)
            if np.any(~(h > 0)) or np.any(np.diff(h) <= 0):
                raise ValueError("h must be positive and strictly increasing")
        else:
            raise ValueError(f"unknown source condition family {self.family!r}")

    @classmethod
    def power(cls, p: float, rho: float) -> "SourceCondition":
        return cls("power", float(rho), p=float(p))

    @classmethod
    def exponential(cls, gamma: float, rho: float) -> "SourceCondition":
        return cls("exp", float(rho), gamma=float(gamma))

    @classmethod
    def general(cls, fn, rho: float, log_fn=None) -> "SourceCondition":
        return cls("general", float(rho), fn=fn, log_fn=log_fn)

    def symbol(self, t: float, tau: float) -> ScalarSymbol:
        """``h_t`` as a spectral symbol."""
        if self.family == "power":
            return ScalarSymbol.power(self.p)
        if self.family == "exp":
            return ScalarSymbol.exponential(self.gamma * _span(t, tau))
        return ScalarSymbol.general(self.fn, self.log_fn)

    def log_h(self, lam, t: float, tau: float):
        with np.errstate(divide="ignore"):
            return self.symbol(t, tau).log_magnitude(np.asarray(lam, dtype=float))

    def with_rho(self, rho: float) -> "SourceCondition":
        return SourceCondition(self.family, float(rho), self.p, self.gamma, self.fn, self.log_fn)

    def __str__(self):
        if self.family == "power":
            return f"power p={self.p!r} rho={self.rho!r}"
        if self.family == "exp":
            return f"exp gamma={self.gamma!r} rho={self.rho!r}"
        return f"general rho={self.rho!r}"


@dataclass(frozen=True)
class RegChoice:
    """A regularization method with its parameter (``beta`` or ``alpha``)."""

    method: str
    parameter: float

    def __post_init__(self):
        if self.method not in ("truncation", "lavrentiev"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.parameter > 0:
            raise ValueError(f"regularization parameter must be positive, got {self.parameter}")


# Solvers =====================================================================
def truncated_solution(problem: FinalValueProblem, t: float, beta: float) -> SpectralVector:
    """Spectral cutoff ``sum_{lam_n <= beta} e^{(tau-t) lam_n} psi_n(t) e_n``.

    Modes with ``lam_n == beta`` are kept.

    Raises
    ------
    ParameterOverflow
        If ``(tau - t) * beta`` exceeds the log-representability threshold.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    t = problem._time(t, allow_tau=False)
    s = problem.tau - t
    if s * beta > LOG_THRESHOLD:
        raise ParameterOverflow(
            f"(tau-t)*beta = {s * beta:.6g} exceeds {LOG_THRESHOLD:g}; "
            "the truncation level is absurdly large"
        )
    psi = accumulate_psi(problem, t)
    lam = problem.eigensystem.eigenvalues
    keep = lam <= beta
    out = np.zeros(len(lam))
    out[keep] = np.exp(s * lam[keep]) * psi.coefficients[keep]
    if not np.all(np.isfinite(out)):
        raise DomainViolation("truncated solution overflowed; data too large")
    return SpectralVector(problem.eigensystem, out)


def lavrentiev_solution(problem: FinalValueProblem, t: float, alpha: float) -> SpectralVector:
    """Solve ``(e^{-(tau-t)A} + alpha I) u = psi(t)`` mode by mode."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    t = problem._time(t, allow_tau=False)
    psi = accumulate_psi(problem, t)
    a = np.exp(-(problem.tau - t) * problem.eigensystem.eigenvalues)
    return SpectralVector(problem.eigensystem, psi.coefficients / (a + alpha))


def solve(problem: FinalValueProblem, t: float, choice: RegChoice) -> SpectralVector:
    if choice.method == "truncation":
        return truncated_solution(problem, t, choice.parameter)
    return lavrentiev_solution(problem, t, choice.parameter)


# Bounds ======================================================================
def stability_bound(beta: float, t: float, tau: float, delta: float) -> float:
    """Noise amplification bound ``e^{(tau-t) beta} * delta``."""
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    x = (float(tau) - float(t)) * beta
    if x > LOG_THRESHOLD:
        raise ParameterOverflow(f"(tau-t)*beta = {x:.6g} exceeds {LOG_THRESHOLD:g}")
    if delta == 0:
        return 0.0
    return math.exp(x) * delta


def truncation_error_bound(sc: SourceCondition, beta: float, t: float, tau: float) -> float:
    """Conservative truncation error bound ``rho_t / h_t(beta)``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return math.exp(math.log(sc.rho) - float(sc.log_h(beta, t, tau)))


def tail_rho(problem: FinalValueProblem, t: float, beta: float, sc: SourceCondition) -> float:
    """Sharp constant ``rho_{t,beta}``: the norm of ``h_t(A) u(t)`` restricted
    to modes with ``lam_n > beta``.

    Raises
    ------
    DomainViolation
        If the exact solution fails the source condition at working precision.
    """
    t = problem._time(t, allow_tau=False)
    psi = accumulate_psi(problem, t)
    tail = np.where(problem.eigensystem.eigenvalues > beta, psi.coefficients, 0.0)
    g = sc.symbol(t, problem.tau) * ScalarSymbol.exponential(problem.tau - t)
    return apply_calculus(g, SpectralVector(problem.eigensystem, tail)).norm()


def total_bound(
    sc: SourceCondition,
    beta: float,
    t: float,
    tau: float,
    delta: float,
    rho: Optional[float] = None,
) -> float:
    """Bound on ``||u(t) - u~_beta(t)||`` for data within ``delta``.

    ``rho`` replaces ``sc.rho`` in the truncation term, e.g. with the sharp
    ``tail_rho`` when the exact solution is known.
    """
    if rho is not None:
        sc = sc.with_rho(rho) if rho > 0 else None
    trunc = 0.0 if sc is None else truncation_error_bound(sc, beta, t, tau)
    return trunc + stability_bound(beta, t, tau, delta)


def lavrentiev_bound(rho: float, gamma: float, alpha: float, delta: float) -> float:
    """``rho * alpha**gamma + delta / alpha`` with ``gamma`` clamped to 1."""
    return rho * alpha ** min(gamma, 1.0) + delta / alpha


# Parameter choice ============================================================
def choose_beta_general(sc: SourceCondition, t: float, tau: float, delta: float) -> float:
    """Solve ``h_t(beta) e^{(tau-t) beta} = rho / delta`` for ``beta``.

    The left side is strictly increasing; it is bracketed by doubling from
    ``beta = 1`` and then bisected to relative accuracy ``1e-12``. Work is
    done on logarithms since the target spans many orders of magnitude.

    Raises
    ------
    NoBracket
        If ``rho / delta`` does not exceed the left side at ``beta = 0``.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    s = _span(t, tau)
    target = math.log(sc.rho) - math.log(delta)

    def log_xi(b):
        return float(sc.log_h(b, t, tau)) + s * b

    if not log_xi(0.0) < target:
        raise NoBracket(
            f"rho/delta = {math.exp(target):.6g} does not exceed xi(0) = "
            f"{math.exp(log_xi(0.0)):.6g}; noise too large for a positive truncation level"
        )
    lo, hi = 0.0, 1.0
    while log_xi(hi) < target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise NoBracket("could not bracket the parameter equation")
    mid = hi
    for _ in range(BISECTION_MAXITER):
        mid = 0.5 * (lo + hi)
        r = log_xi(mid) - target
        if abs(math.expm1(r)) <= BISECTION_RTOL:
            return mid
        if r < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.spacing(hi):
            break
    logger.warning("bisection stopped at interval width %.3g", hi - lo)
    return mid


def choose_beta_exponential(gamma: float, t: float, tau: float, delta: float) -> float:
    """Closed-form ``beta_t = log(1/delta) / ((gamma + 1)(tau - t))``.

    With this level both terms of the error bound scale like
    ``delta**(gamma / (gamma + 1))``.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return -math.log(delta) / ((gamma + 1.0) * _span(t, tau))


def choose_beta_power_of_delta(p: float, t: float, tau: float, delta: float) -> float:
    """``beta = p * log(1/delta) / (tau - t)``.

    Needs no smoothness information. The propagated noise term is then
    ``e^{(tau-t) beta} delta = delta**(1 - p)``, which vanishes with
    ``delta`` while ``beta`` grows without bound.
    """
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return -p * math.log(delta) / _span(t, tau)


def choose_alpha_lavrentiev(gamma: float, rho_t: float, delta: float) -> float:
    """Balancing shift ``alpha = (delta / rho_t)**(1 / (gamma + 1))``.

    Lavrentiev's estimate only holds for ``gamma <= 1``; larger values
    are clamped to 1 (saturation) and the clamp is logged.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if not rho_t > 0 or not delta > 0:
        raise ValueError("rho_t and delta must be positive")
    if gamma > 1:
        logger.info("Lavrentiev saturation: gamma=%g clamped to 1", gamma)
        gamma = 1.0
    return (delta / rho_t) ** (1.0 / (gamma + 1.0))


def beta_alpha_correspondence(alpha: float, t: float, tau: float) -> float:
    """Truncation level whose noise amplification equals ``1 / alpha``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return -math.log(alpha) / _span(t, tau)


def source_condition_norm(u_t: SpectralVector, sc: SourceCondition, t: float, tau: float) -> float:
    """``||h_t(A) u(t)||``; certifies ``rho_t`` for a known solution.

    Raises
    ------
    DomainViolation
        If ``u(t)`` is not in ``D(h_t(A))`` at working precision.
    """
    return apply_calculus(sc.symbol(t, tau), u_t).norm()
