"""Diagonal realization of a positive self-adjoint operator and its
functional calculus.

An operator ``A`` with compact resolvent is represented by its eigenvalues;
an element of the Hilbert space by its coefficients in the eigenbasis.
Then ``g(A)`` acts mode by mode, ``(g(A) v)_n = g(lambda_n) v_n``, and the
domain condition ``v in D(g(A))`` becomes the requirement that every
product ``g(lambda_n) v_n`` be representable in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainViolation

__all__ = [
    "LOG_THRESHOLD",
    "EigenSystem",
    "SpectralVector",
    "ScalarSymbol",
    "norm",
    "apply_calculus",
    "domain_check",
    "semigroup_apply",
    "make_dirichlet_laplacian",
]

#: Largest admissible natural log of a per-mode product; ``exp(709.78)``
#: is the double-precision overflow point.
LOG_THRESHOLD = 700.0


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending positive eigenvalues of ``A``.

    Repeated eigenvalues encode multiplicity; there is no separate
    multiplicity field.
    """

    eigenvalues: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        lam = _readonly(np.atleast_1d(self.eigenvalues))
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("eigenvalues must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be sorted in ascending order")
        object.__setattr__(self, "eigenvalues", lam)

    def __len__(self):
        return self.eigenvalues.size

    def __repr__(self):
        name = f" {self.label!r}" if self.label else ""
        return f"<EigenSystem{name} n={len(self)} max={self.eigenvalues[-1]:g}>"

    def matches(self, other: "EigenSystem") -> bool:
        return self is other or (
            len(self) == len(other)
            and np.array_equal(self.eigenvalues, other.eigenvalues)
        )

    def vector(self, coefficients) -> "SpectralVector":
        return SpectralVector(self, coefficients)

    def zeros(self) -> "SpectralVector":
        return SpectralVector(self, np.zeros(len(self)))

    def basis(self, index: int) -> "SpectralVector":
        """Unit vector of the mode with 0-based ``index``."""
        c = np.zeros(len(self))
        c[index] = 1.0
        return SpectralVector(self, c)


@dataclass(frozen=True, eq=False)
class SpectralVector:
    """Coefficients of an element of ``H`` in the eigenbasis of ``A``."""

    eigensystem: EigenSystem
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = _readonly(np.atleast_1d(self.coefficients))
        if c.shape != (len(self.eigensystem),):
            raise ValueError(
                f"expected {len(self.eigensystem)} coefficients, got shape {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    @property
    def eigenvalues(self):
        return self.eigensystem.eigenvalues

    def __len__(self):
        return self.coefficients.size

    def __repr__(self):
        return f"SpectralVector({np.array2string(self.coefficients, precision=6)})"

    def _other(self, other):
        if isinstance(other, SpectralVector):
            if not self.eigensystem.matches(other.eigensystem):
                raise ValueError("spectral vectors belong to different eigensystems")
            return other.coefficients
        return NotImplemented

    def __add__(self, other):
        c = self._other(other)
        if c is NotImplemented:
            return c
        return SpectralVector(self.eigensystem, self.coefficients + c)

    def __sub__(self, other):
        c = self._other(other)
        if c is NotImplemented:
            return c
        return SpectralVector(self.eigensystem, self.coefficients - c)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralVector):
            return NotImplemented
        return SpectralVector(self.eigensystem, self.coefficients * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralVector(self.eigensystem, -self.coefficients)

    def norm(self) -> float:
        return _stable_norm(self.coefficients)

    def allclose(self, other: "SpectralVector", rtol=1e-12, atol=0.0) -> bool:
        return np.allclose(self.coefficients, self._other(other), rtol=rtol, atol=atol)


def _stable_norm(c: np.ndarray) -> float:
    # scaled to avoid overflow of the squares near the representability limit
    m = float(np.max(np.abs(c))) if c.size else 0.0
    if m == 0.0:
        return 0.0
    return m * float(np.sqrt(np.sum((c / m) ** 2)))


def norm(v: SpectralVector) -> float:
    """Hilbert-space norm, the root of the summed squared coefficients."""
    return v.norm()


# Scalar symbols ==============================================================
@dataclass(frozen=True, eq=False)
class ScalarSymbol:
    """A real function ``g`` on the spectrum, evaluated mode by mode.

    Every symbol knows ``log|g(lambda)|`` so that products with tiny
    coefficients can be formed without passing through an overflowing
    intermediate. Build symbols with the class methods rather than the
    constructor.
    """

    kind: str
    params: tuple
    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    log_magnitude: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    exponential_type: bool = False

    @classmethod
    def power(cls, p: float) -> "ScalarSymbol":
        """``g(lambda) = lambda**p``."""
        p = float(p)
        return cls("power", (p,), lambda lam: np.power(lam, p),
                   lambda lam: p * np.log(lam))

    @classmethod
    def exponential(cls, q: float) -> "ScalarSymbol":
        """``g(lambda) = exp(q * lambda)``."""
        q = float(q)
        return cls("exponential", (q,), lambda lam: np.exp(q * lam),
                   lambda lam: q * lam, exponential_type=True)

    @classmethod
    def semigroup(cls, t: float) -> "ScalarSymbol":
        """``g(lambda) = exp(-t * lambda)``, the symbol of ``e^{-tA}``."""
        t = float(t)
        return cls("semigroup", (t,), lambda lam: np.exp(-t * lam),
                   lambda lam: -t * lam, exponential_type=True)

    @classmethod
    def one(cls) -> "ScalarSymbol":
        return cls("power", (0.0,), np.ones_like, np.zeros_like)

    @classmethod
    def general(cls, fn, log_magnitude=None) -> "ScalarSymbol":
        """Wrap an arbitrary vectorized callable.

        If ``log_magnitude`` is omitted it is taken as ``log|fn|``, which
        only helps as long as ``fn`` itself does not overflow.
        """
        if log_magnitude is None:
            def log_magnitude(lam):
                with np.errstate(divide="ignore", over="ignore"):
                    return np.log(np.abs(fn(lam)))
        return cls("general", (fn,), fn, log_magnitude)

    def __call__(self, lam):
        with np.errstate(over="ignore"):
            return np.asarray(self.evaluate(np.asarray(lam, dtype=float)), dtype=float)

    def __mul__(self, other: "ScalarSymbol") -> "ScalarSymbol":
        if not isinstance(other, ScalarSymbol):
            return NotImplemented
        a, b = self, other

        def evaluate(lam):
            with np.errstate(over="ignore", invalid="ignore"):
                return a(lam) * b(lam)

        return ScalarSymbol(
            "product", (a, b), evaluate,
            lambda lam: a.log_magnitude(lam) + b.log_magnitude(lam),
            exponential_type=a.exponential_type or b.exponential_type,
        )


def _log_products(g: ScalarSymbol, v: SpectralVector):
    c = v.coefficients
    nz = c != 0
    with np.errstate(divide="ignore", invalid="ignore"):
        logg = np.asarray(g.log_magnitude(v.eigenvalues), dtype=float)
        logp = np.where(nz, logg + np.log(np.abs(np.where(nz, c, 1.0))), -np.inf)
    return logg, logp, nz


def domain_check(g: ScalarSymbol, v: SpectralVector) -> bool:
    """Whether ``v`` lies in the domain of ``g(A)`` at working precision.

    Modes with zero coefficient never violate the domain, however large
    ``g`` is there.
    """
    _, logp, nz = _log_products(g, v)
    bad = nz & ~(logp <= LOG_THRESHOLD)  # catches nan as well
    return not bool(np.any(bad))


def apply_calculus(g: ScalarSymbol, v: SpectralVector) -> SpectralVector:
    """Return ``g(A) v``.

    Raises
    ------
    DomainViolation
        If some ``g(lambda_n) v_n`` exceeds the representability threshold.
    """
    logg, logp, nz = _log_products(g, v)
    bad = nz & ~(logp <= LOG_THRESHOLD)
    if np.any(bad):
        n = int(np.flatnonzero(bad)[0])
        raise DomainViolation(
            f"mode {n} (lambda={v.eigenvalues[n]:g}) has log-magnitude "
            f"{logp[n]:.6g} > {LOG_THRESHOLD:g}; element not in D(g(A))"
        )
    c = v.coefficients
    gv = g(v.eigenvalues)
    direct = logg <= LOG_THRESHOLD
    out = np.zeros_like(c)
    out[direct] = gv[direct] * c[direct]
    # g itself overflows here but the product with a tiny coefficient does not
    far = nz & ~direct
    if np.any(far):
        gs = np.sign(gv[far])
        gs = np.where(np.isnan(gs) | (gs == 0), 1.0, gs)
        out[far] = np.sign(c[far]) * gs * np.exp(logp[far])
    return SpectralVector(v.eigensystem, out)


def semigroup_apply(t: float, v: SpectralVector) -> SpectralVector:
    """Apply the contraction semigroup ``e^{-tA}`` for ``t >= 0``."""
    if t < 0:
        raise ValueError(f"semigroup time must be non-negative, got {t}")
    return SpectralVector(v.eigensystem, v.coefficients * np.exp(-t * v.eigenvalues))


def make_dirichlet_laplacian(n_modes: int) -> EigenSystem:
    """Spectrum ``1, 4, ..., n_modes**2`` of ``-d^2/dx^2`` on ``(0, pi)``
    with homogeneous Dirichlet conditions."""
    if int(n_modes) != n_modes or n_modes < 1:
        raise ValueError(f"n_modes must be a positive integer, got {n_modes!r}")
    k = np.arange(1, int(n_modes) + 1, dtype=float)
    return EigenSystem(k**2, label=f"dirichlet-laplacian-{int(n_modes)}")
