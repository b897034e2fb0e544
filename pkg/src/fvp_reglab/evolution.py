"""Forward and backward mild solutions of ``u' + Au = f``.

All formulas are evaluated directly in spectral coordinates. The only
integrals that ever appear are of the form

    int_a^b exp(-(c - s) * lam) f_n(s) ds

for one eigenvalue ``lam`` and one mode function ``f_n``; constant and
exponential mode functions are integrated in closed form, sampled and
callable ones by composite rules with a Richardson error certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import QuadratureTolerance
from .spectral import (
    EigenSystem,
    ScalarSymbol,
    SpectralVector,
    apply_calculus,
    domain_check,
    semigroup_apply,
)

__all__ = [
    "QUAD_RTOL",
    "QUAD_ATOL",
    "TimeGrid",
    "ModeFunction",
    "SourceTerm",
    "FinalValueProblem",
    "ManufacturedTruth",
    "bochner_quadrature",
    "ivp_mild_solution",
    "accumulate_psi",
    "fvp_mild_solution",
    "classical_solution_check",
    "manufacture_problem",
]

# Richardson certificate: |T_h - T_2h| / 3 <= QUAD_ATOL + QUAD_RTOL * int|integrand|
QUAD_RTOL = 1e-3
QUAD_ATOL = 1e-12

_RULES = ("trapezoid", "gauss-legendre")


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Ascending quadrature nodes with an associated composite rule."""

    points: np.ndarray
    rule: str = "trapezoid"

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("a time grid needs at least 2 points")
        if np.any(np.diff(p) <= 0):
            raise ValueError("time grid points must be strictly ascending")
        if self.rule not in _RULES:
            raise ValueError(f"unknown quadrature rule {self.rule!r}; expected one of {_RULES}")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @classmethod
    def uniform(cls, a: float, b: float, n_points: int, rule: str = "trapezoid"):
        return cls(np.linspace(a, b, n_points), rule)

    def clipped(self, a: float, b: float) -> np.ndarray:
        """Grid nodes strictly inside ``(a, b)`` with ``a`` and ``b`` added."""
        p = self.points
        inner = p[(p > a) & (p < b)]
        return np.concatenate(([a], inner, [b]))


# Mode functions ==============================================================
def _expint(k: float, length: float) -> float:
    """``int_0^length exp(-k x) dx``, stable for k near zero and k < 0."""
    if length == 0.0:
        return 0.0
    x = k * length
    if abs(x) < 1e-12:
        return length * (1.0 - 0.5 * x)
    return -math.expm1(-x) / k


@dataclass(frozen=True, eq=False)
class ModeFunction:
    """Time profile ``f_n(s)`` of one spectral mode of the source term.

    A mode function is a sum of a constant, exponentials ``c * exp(mu s)``,
    at most one sampled profile on a uniform grid starting at ``s = 0``
    (linearly interpolated between samples), and scaled callables.
    Sums and negations stay in this form, so differences of perturbed and
    unperturbed sources keep their closed-form parts.
    """

    const: float = 0.0
    exps: tuple = ()
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    step: Optional[float] = None
    funcs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "const", float(self.const))
        merged = {}
        for c, mu in self.exps:
            merged[float(mu)] = merged.get(float(mu), 0.0) + float(c)
        object.__setattr__(
            self, "exps", tuple((c, mu) for mu, c in sorted(merged.items()) if c != 0.0)
        )
        if self.samples is not None:
            s = np.array(self.samples, dtype=float)
            if s.ndim != 1 or s.size < 2:
                raise ValueError("sampled mode needs at least 2 samples")
            if self.step is None or not self.step > 0:
                raise ValueError("sampled mode needs a positive step")
            if not np.all(np.isfinite(s)):
                raise ValueError("samples must be finite")
            s.setflags(write=False)
            object.__setattr__(self, "samples", s)
            object.__setattr__(self, "step", float(self.step))
        funcs = {}
        for fn, scale in self.funcs:
            prev = funcs.get(id(fn), (fn, 0.0))
            funcs[id(fn)] = (fn, prev[1] + float(scale))
        object.__setattr__(
            self, "funcs", tuple(fs for fs in funcs.values() if fs[1] != 0.0)
        )

    @classmethod
    def constant(cls, c: float) -> "ModeFunction":
        return cls(const=c)

    @classmethod
    def exponential(cls, c: float, mu: float) -> "ModeFunction":
        return cls(exps=((c, mu),))

    @classmethod
    def sampled(cls, values, step: float) -> "ModeFunction":
        return cls(samples=values, step=step)

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray]) -> "ModeFunction":
        return cls(funcs=((fn, 1.0),))

    @property
    def is_constant(self) -> bool:
        return not self.exps and self.samples is None and not self.funcs

    @property
    def sample_end(self) -> float:
        return (self.samples.size - 1) * self.step if self.samples is not None else math.inf

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.full(s.shape, self.const)
        for c, mu in self.exps:
            out = out + c * np.exp(mu * s)
        if self.samples is not None:
            nodes = np.arange(self.samples.size) * self.step
            out = out + np.interp(s, nodes, self.samples)
        for fn, scale in self.funcs:
            out = out + scale * np.asarray(fn(s), dtype=float)
        return out

    def __add__(self, other: "ModeFunction") -> "ModeFunction":
        if not isinstance(other, ModeFunction):
            return NotImplemented
        samples, step = self.samples, self.step
        if other.samples is not None:
            if samples is None:
                samples, step = other.samples, other.step
            elif samples.size != other.samples.size or step != other.step:
                raise ValueError("cannot add sampled modes on different grids")
            else:
                samples = samples + other.samples
        return ModeFunction(
            self.const + other.const, self.exps + other.exps, samples, step,
            self.funcs + other.funcs,
        )

    def scaled(self, k: float) -> "ModeFunction":
        k = float(k)
        return ModeFunction(
            self.const * k,
            tuple((c * k, mu) for c, mu in self.exps),
            None if self.samples is None else self.samples * k,
            self.step,
            tuple((fn, s * k) for fn, s in self.funcs),
        )

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        return self + (-other)


# Quadrature ==================================================================
def _richardson_check(fine, coarse, scale, rtol, atol, what):
    est = abs(fine - coarse) / 3.0
    if est > atol + rtol * scale:
        raise QuadratureTolerance(
            f"{what}: Richardson error estimate {est:.3e} exceeds "
            f"{atol + rtol * scale:.3e}; refine the time grid"
        )


def _trapezoid_certified(nodes, values, rtol, atol, what):
    fine = float(np.trapezoid(values, nodes))
    if nodes.size >= 3:
        idx = np.arange(0, nodes.size, 2)
        if idx[-1] != nodes.size - 1:
            idx = np.append(idx, nodes.size - 1)
        coarse = float(np.trapezoid(values[idx], nodes[idx]))
        scale = float(np.trapezoid(np.abs(values), nodes))
        _richardson_check(fine, coarse, scale, rtol, atol, what)
    return fine


_GL5 = np.polynomial.legendre.leggauss(5)
_GL10 = np.polynomial.legendre.leggauss(10)


def _gauss_panels(g, nodes, rule):
    x, w = rule
    lo, hi = nodes[:-1, None], nodes[1:, None]
    half = 0.5 * (hi - lo)
    s = lo + half * (x + 1.0)
    return float(np.sum(half * w * g(s))), float(np.sum(half * w * np.abs(g(s))))


def bochner_quadrature(
    mode_fn: ModeFunction,
    kernel_rate: float,
    a: float,
    b: float,
    grid: Optional[TimeGrid] = None,
    anchor: Optional[float] = None,
    rtol: float = QUAD_RTOL,
    atol: float = QUAD_ATOL,
) -> float:
    """Integrate ``exp(-(anchor - s) * kernel_rate) * mode_fn(s)`` over ``[a, b]``.

    ``anchor`` defaults to ``b``, which is the kernel of both the forward
    mild solution (``b = t``) and of the data functional (``b = tau``).

    Constant and exponential parts are integrated exactly. A sampled part
    uses the composite trapezoid rule on its own sample nodes; callable
    parts use ``grid`` (default: 64 uniform Gauss-Legendre panels). Each
    numerical part carries a Richardson certificate.

    Raises
    ------
    QuadratureTolerance
        If the half-step comparison disagrees by more than the tolerance.
    """
    if a > b:
        raise ValueError(f"integration bounds out of order: a={a} > b={b}")
    if a == b:
        return 0.0
    lam = float(kernel_rate)
    c = float(b if anchor is None else anchor)
    length = b - a
    total = 0.0
    if mode_fn.const:
        total += mode_fn.const * math.exp(-(c - b) * lam) * _expint(lam, length)
    for coef, mu in mode_fn.exps:
        total += coef * math.exp(mu * b - (c - b) * lam) * _expint(lam + mu, length)

    def kernel(s):
        return np.exp(-(c - s) * lam)

    if mode_fn.samples is not None:
        if b > mode_fn.sample_end * (1 + 1e-12):
            raise ValueError(
                f"sampled mode covers [0, {mode_fn.sample_end:g}] but the "
                f"integral extends to {b:g}"
            )
        nodes = np.arange(mode_fn.samples.size) * mode_fn.step
        inner = nodes[(nodes > a) & (nodes < b)]
        s = np.concatenate(([a], inner, [b]))
        vals = kernel(s) * np.interp(s, nodes, mode_fn.samples)
        total += _trapezoid_certified(s, vals, rtol, atol, "sampled mode")
    if mode_fn.funcs:
        if grid is None:
            grid = TimeGrid.uniform(a, b, 65, "gauss-legendre")

        def g(s):
            out = np.zeros_like(s)
            for fn, scale in mode_fn.funcs:
                out = out + scale * np.asarray(fn(s), dtype=float)
            return kernel(s) * out

        nodes = grid.clipped(a, b)
        if grid.rule == "trapezoid":
            mids = 0.5 * (nodes[:-1] + nodes[1:])
            fine_nodes = np.sort(np.concatenate((nodes, mids)))
            vals = g(fine_nodes)
            fine = float(np.trapezoid(vals, fine_nodes))
            coarse = float(np.trapezoid(vals[::2], fine_nodes[::2]))
            scale = float(np.trapezoid(np.abs(vals), fine_nodes))
        else:
            coarse, _ = _gauss_panels(g, nodes, _GL5)
            fine, scale = _gauss_panels(g, nodes, _GL10)
        _richardson_check(fine, coarse, scale, rtol, atol, "callable mode")
        total += fine
    return total


# Source terms ================================================================
@dataclass(frozen=True, eq=False)
class SourceTerm:
    """The non-homogeneous term ``f`` as one time profile per mode."""

    modes: tuple
    grid: Optional[TimeGrid] = None

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise ValueError("a source term needs at least one mode")
        if not all(isinstance(m, ModeFunction) for m in modes):
            raise TypeError("source modes must be ModeFunction instances")
        steps = {m.step for m in modes if m.samples is not None}
        if len(steps) > 1:
            raise ValueError("sampled modes must share a single step")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def zero(cls, n: int) -> "SourceTerm":
        return cls((ModeFunction(),) * n)

    @classmethod
    def constant(cls, values: Sequence[float]) -> "SourceTerm":
        return cls(tuple(ModeFunction.constant(c) for c in values))

    @classmethod
    def exponential(cls, coefs: Sequence[float], rates: Sequence[float]) -> "SourceTerm":
        """``f_n(s) = coefs[n] * exp(rates[n] * s)``."""
        return cls(tuple(ModeFunction.exponential(c, mu) for c, mu in zip(coefs, rates, strict=True)))

    @classmethod
    def sampled(cls, values, step: float) -> "SourceTerm":
        """Rows of ``values`` are modes, columns the samples at ``j * step``."""
        values = np.asarray(values, dtype=float)
        return cls(tuple(ModeFunction.sampled(row, step) for row in values))

    def __len__(self):
        return len(self.modes)

    def __call__(self, s: float) -> np.ndarray:
        return np.array([float(m(s)) for m in self.modes])

    def _check(self, other):
        if len(other) != len(self):
            raise ValueError(f"source terms have {len(self)} and {len(other)} modes")

    def __add__(self, other: "SourceTerm") -> "SourceTerm":
        if not isinstance(other, SourceTerm):
            return NotImplemented
        self._check(other)
        return SourceTerm(tuple(m + o for m, o in zip(self.modes, other.modes)),
                          self.grid or other.grid)

    def __neg__(self):
        return SourceTerm(tuple(-m for m in self.modes), self.grid)

    def __sub__(self, other):
        return self + (-other)

    @property
    def is_time_constant(self) -> bool:
        return all(m.is_constant for m in self.modes)

    @property
    def is_zero(self) -> bool:
        return all(m.is_constant and m.const == 0.0 for m in self.modes)

    def constant_values(self) -> np.ndarray:
        if not self.is_time_constant:
            raise ValueError("source term is not constant in time")
        return np.array([m.const for m in self.modes])

    def kernel_integrals(self, eigenvalues, a, b, anchor=None, **quad) -> np.ndarray:
        """Per-mode ``int_a^b exp(-(anchor - s) lam_n) f_n(s) ds``."""
        if len(eigenvalues) != len(self):
            raise ValueError("source term and eigensystem sizes differ")
        return np.array([
            bochner_quadrature(m, lam, a, b, self.grid, anchor, **quad)
            for m, lam in zip(self.modes, eigenvalues)
        ])


# Problems ====================================================================
@dataclass(frozen=True, eq=False)
class FinalValueProblem:
    """Data ``(A, tau, phi_tau, f)`` of the backward problem.

    ``truth``, when present, maps ``t`` to the exact mild solution and is
    only used to measure errors.
    """

    eigensystem: EigenSystem
    tau: float
    phi_tau: SpectralVector
    source: SourceTerm
    truth: Optional[Callable[[float], SpectralVector]] = None

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        object.__setattr__(self, "tau", float(self.tau))
        if not self.phi_tau.eigensystem.matches(self.eigensystem):
            raise ValueError("phi_tau does not belong to the problem eigensystem")
        if len(self.source) != len(self.eigensystem):
            raise ValueError(
                f"source has {len(self.source)} modes, eigensystem {len(self.eigensystem)}"
            )
        for m in self.source.modes:
            if m.sample_end < self.tau * (1 - 1e-12):
                raise ValueError(f"sampled source ends at {m.sample_end:g} < tau={self.tau:g}")

    def with_data(self, phi_tau: SpectralVector, source: SourceTerm) -> "FinalValueProblem":
        """Same problem with replaced (e.g. noisy) data and no truth."""
        return replace(self, phi_tau=phi_tau, source=source, truth=None)

    def _time(self, t, allow_tau):
        if not (0 <= t < self.tau or (allow_tau and t == self.tau)):
            bound = "]" if allow_tau else ")"
            raise ValueError(f"t={t} outside [0, tau{bound} with tau={self.tau}")
        return float(t)


class ManufacturedTruth:
    """Exact solution ``t -> u(t)`` of a problem built from a known ``u(0)``."""

    def __init__(self, target_u0: SpectralVector, source: SourceTerm):
        self.target_u0 = target_u0
        self.source = source

    def __call__(self, t: float) -> SpectralVector:
        return ivp_mild_solution(self.target_u0, self.source, t)

    def __repr__(self):
        return f"ManufacturedTruth(target_u0={self.target_u0!r})"


def ivp_mild_solution(phi0: SpectralVector, source: SourceTerm, t: float) -> SpectralVector:
    """Forward mild solution ``e^{-tA} phi0 + int_0^t e^{-(t-s)A} f(s) ds``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    free = semigroup_apply(t, phi0)
    if source.is_zero or t == 0:
        return free
    forced = source.kernel_integrals(phi0.eigenvalues, 0.0, float(t))
    return SpectralVector(phi0.eigensystem, free.coefficients + forced)


def accumulate_psi(problem: FinalValueProblem, t: float) -> SpectralVector:
    """Data functional ``psi(t) = phi_tau - int_t^tau e^{-(tau-s)A} f(s) ds``."""
    t = problem._time(t, allow_tau=True)
    if problem.source.is_zero or t == problem.tau:
        return problem.phi_tau
    integral = problem.source.kernel_integrals(problem.eigensystem.eigenvalues, t, problem.tau)
    return SpectralVector(problem.eigensystem, problem.phi_tau.coefficients - integral)


def fvp_mild_solution(problem: FinalValueProblem, t: float) -> SpectralVector:
    """Exact, unregularized mild solution ``e^{(tau-t)A} psi(t)``.

    Raises
    ------
    DomainViolation
        If ``psi(t)`` is not in the domain of ``e^{(tau-t)A}`` at working
        precision.
    """
    t = problem._time(t, allow_tau=False)
    psi = accumulate_psi(problem, t)
    return apply_calculus(ScalarSymbol.exponential(problem.tau - t), psi)


def classical_solution_check(phi: SpectralVector, eigensystem: EigenSystem, tau: float) -> bool:
    """Whether ``phi`` lies in ``D(A e^{tau A})``.

    For a homogeneous problem with final value ``phi`` this decides
    whether the mild solution is a classical one.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not phi.eigensystem.matches(eigensystem):
        raise ValueError("phi does not belong to the given eigensystem")
    return domain_check(ScalarSymbol.power(1.0) * ScalarSymbol.exponential(tau), phi)


def manufacture_problem(
    eigensystem: EigenSystem,
    tau: float,
    target_u0: SpectralVector,
    source: Optional[SourceTerm] = None,
) -> FinalValueProblem:
    """Build consistent final data by solving forward from ``target_u0``."""
    if not target_u0.eigensystem.matches(eigensystem):
        raise ValueError("target_u0 does not belong to the given eigensystem")
    if source is None:
        source = SourceTerm.zero(len(eigensystem))
    phi_tau = ivp_mild_solution(target_u0, source, tau)
    return FinalValueProblem(eigensystem, tau, phi_tau, source, ManufacturedTruth(target_u0, source))
