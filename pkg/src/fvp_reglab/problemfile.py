"""Human-editable problem files (YAML) with line-numbered diagnostics.

Example::

    eigensystem:
      dirichlet_laplacian: 32        # or: eigenvalues: [1, 4, 9]
    tau: 1.0
    phi_tau: [0.36787944117144233, ...]   # or: manufactured
    u0: [1.0, 0.0, ...]              # exact u(0); enables error reports
    source: zero                     # one entry for all modes, or a list
    source_condition: exp gamma=2 rho=auto
    noise: {delta: 1.0e-3, split: 0.5, seed: 0}

Source entries are ``const c``, ``exp c mu`` (``c * exp(mu s)``) or
``samples [v0, v1, ...] step h``, joinable with `` + ``. The source
condition is ``power p=<real> rho=<real>`` or ``exp gamma=<real>
rho=<real>``; ``rho=auto`` measures ``rho_t`` from ``u0`` at solve time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .evolution import (
    FinalValueProblem,
    ManufacturedTruth,
    ModeFunction,
    SourceTerm,
    ivp_mild_solution,
)
from .regularization import SourceCondition, source_condition_norm
from .spectral import EigenSystem, SpectralVector, make_dirichlet_laplacian

__all__ = [
    "ProblemFileError",
    "ProblemSpec",
    "parse_mode",
    "parse_source_condition",
    "load_problem",
    "loads_problem",
    "dump_problem",
]

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_CONST = re.compile(rf"^const\s+({_NUM})$")
_EXP = re.compile(rf"^exp\s+({_NUM})\s+({_NUM})$")
_SAMPLES = re.compile(rf"^samples\s*\[([^\]]*)\]\s*step\s+({_NUM})$")
_TERM_SPLIT = re.compile(r"\s+\+\s+")
_KV = re.compile(rf"^(\w+)=({_NUM}|auto)$")


class ProblemFileError(ValueError):
    """Malformed problem file; carries the offending line and field."""

    def __init__(self, message, line=None, field=None, path=None):
        self.message, self.line, self.field, self.path = message, line, field, path
        where = path or "<problem>"
        if line is not None:
            where += f":{line}"
        what = f" [{field}]" if field else ""
        super().__init__(f"{where}:{what} {message}")


def parse_mode(text: str) -> ModeFunction:
    """Parse one mode entry of the source grammar."""
    text = str(text).strip()
    if text == "zero":
        return ModeFunction()
    mode = ModeFunction()
    for term in _TERM_SPLIT.split(text):
        if m := _CONST.match(term):
            mode = mode + ModeFunction.constant(float(m[1]))
        elif m := _EXP.match(term):
            mode = mode + ModeFunction.exponential(float(m[1]), float(m[2]))
        elif m := _SAMPLES.match(term):
            values = [float(v) for v in m[1].split(",") if v.strip()]
            mode = mode + ModeFunction.sampled(values, float(m[2]))
        else:
            raise ValueError(
                f"cannot parse source term {term!r}; expected 'const c', "
                "'exp c mu' or 'samples [v0, v1, ...] step h'"
            )
    return mode


def format_mode(mode: ModeFunction) -> str:
    if mode.funcs:
        raise ValueError("callable source terms cannot be written to a problem file")
    terms = []
    if mode.const or not (mode.exps or mode.samples is not None):
        terms.append(f"const {mode.const!r}")
    terms += [f"exp {c!r} {mu!r}" for c, mu in mode.exps]
    if mode.samples is not None:
        vals = ", ".join(repr(float(v)) for v in mode.samples)
        terms.append(f"samples [{vals}] step {mode.step!r}")
    return " + ".join(terms)


def parse_source_condition(text: str):
    """Parse ``power p=.. rho=..`` / ``exp gamma=.. rho=..``.

    Returns ``(family, parameter, rho)``; ``rho`` is ``None`` for ``auto``.
    """
    parts = str(text).split()
    if not parts or parts[0] not in ("power", "exp"):
        raise ValueError(f"source condition must start with 'power' or 'exp': {text!r}")
    family, want = parts[0], {"power": "p", "exp": "gamma"}[parts[0]]
    kv = {}
    for p in parts[1:]:
        m = _KV.match(p)
        if not m:
            raise ValueError(f"malformed source condition field {p!r}")
        kv[m[1]] = m[2]
    if set(kv) != {want, "rho"}:
        raise ValueError(f"{family} source condition needs exactly {want}=<real> rho=<real>")
    if kv[want] == "auto":
        raise ValueError(f"{want} must be a number")
    rho = None if kv["rho"] == "auto" else float(kv["rho"])
    param = float(kv[want])
    # validates signs
    (SourceCondition.power if family == "power" else SourceCondition.exponential)(param, rho or 1.0)
    return family, param, rho


@dataclass
class ProblemSpec:
    """A loaded problem file."""

    problem: FinalValueProblem
    source_condition: Optional[tuple] = None
    noise: dict = field(default_factory=dict)
    path: Optional[str] = None

    def condition_at(self, t: float) -> Optional[SourceCondition]:
        """Source condition with ``rho_t`` resolved (``rho=auto`` is measured
        from the exact solution at ``t``)."""
        if self.source_condition is None:
            return None
        family, param, rho = self.source_condition
        make = SourceCondition.power if family == "power" else SourceCondition.exponential
        if rho is not None:
            return make(param, rho)
        if self.problem.truth is None:
            raise ProblemFileError("rho=auto needs u0 in the problem file",
                                   field="source_condition", path=self.path)
        sc = make(param, 1.0)
        return sc.with_rho(source_condition_norm(self.problem.truth(t), sc, t, self.problem.tau))


# YAML with positions =========================================================
def _to_python(node, marks, path):
    marks[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = _scalar(k)
            out[key] = _to_python(v, marks, path + (key,))
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(v, marks, path + (i,)) for i, v in enumerate(node.value)]
    return _scalar(node)


def _scalar(node):
    if not isinstance(node, yaml.ScalarNode):
        raise ProblemFileError("mapping keys must be plain scalars", node.start_mark.line + 1)
    # resolves tags, so 1e-3 style floats and ints come back typed
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


def _floats(value, what):
    if isinstance(value, bool) or not isinstance(value, list):
        raise ValueError(f"{what} must be a list of numbers")
    out = []
    for v in value:
        if isinstance(v, bool):
            raise ValueError(f"{what} must be a list of numbers")
        try:
            out.append(float(v))
        except (TypeError, ValueError):
            raise ValueError(f"{what} entry {v!r} is not a number") from None
    return out


def _number(value, what):
    if isinstance(value, bool):
        raise ValueError(f"{what} must be a number")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{what} must be a number, got {value!r}") from None


_KNOWN = {"eigensystem", "tau", "phi_tau", "u0", "source", "source_condition", "noise"}


def loads_problem(text: str, path: Optional[str] = None) -> ProblemSpec:
    """Parse problem-file text.

    Raises
    ------
    ProblemFileError
        With the line number and field of the first problem found.
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        msg = getattr(exc, "problem", None) or str(exc)
        raise ProblemFileError(f"YAML syntax error: {msg}", line, path=path) from None
    if root is None:
        raise ProblemFileError("empty problem file", 1, path=path)
    marks = {}
    data = _to_python(root, marks, ())
    if not isinstance(data, dict):
        raise ProblemFileError("top level must be a mapping", 1, path=path)

    def fail(msg, *keys):
        line = None
        for n in range(len(keys), -1, -1):
            if keys[:n] in marks:
                line = marks[keys[:n]]
                break
        raise ProblemFileError(msg, line, ".".join(map(str, keys)) or None, path)

    for key in data:
        if key not in _KNOWN:
            fail(f"unknown section {key!r}", key)
    for key in ("eigensystem", "tau", "phi_tau"):
        if key not in data:
            raise ProblemFileError(f"missing required section {key!r}", None, key, path)

    es = data["eigensystem"]
    try:
        if isinstance(es, dict) and "dirichlet_laplacian" in es:
            n = es["dirichlet_laplacian"]
            if isinstance(n, bool) or not isinstance(n, int):
                fail("dirichlet_laplacian needs an integer mode count", "eigensystem", "dirichlet_laplacian")
            eig = make_dirichlet_laplacian(n)
        elif isinstance(es, dict) and "eigenvalues" in es:
            eig = EigenSystem(_floats(es["eigenvalues"], "eigenvalues"), es.get("label"))
        elif isinstance(es, list):
            eig = EigenSystem(_floats(es, "eigenvalues"))
        else:
            fail("expected 'dirichlet_laplacian: N' or 'eigenvalues: [...]'", "eigensystem")
    except ProblemFileError:
        raise
    except ValueError as exc:
        fail(str(exc), "eigensystem")
    n = len(eig)

    try:
        tau = _number(data["tau"], "tau")
        if not tau > 0:
            raise ValueError("tau must be positive")
    except ValueError as exc:
        fail(str(exc), "tau")

    src = data.get("source", "zero")
    try:
        if isinstance(src, list):
            if len(src) != n:
                fail(f"source lists {len(src)} modes, eigensystem has {n}", "source")
            modes = []
            for i, entry in enumerate(src):
                try:
                    modes.append(parse_mode(entry))
                except ValueError as exc:
                    fail(str(exc), "source", i)
            source = SourceTerm(tuple(modes))
        else:
            source = SourceTerm((parse_mode(src),) * n)
    except ProblemFileError:
        raise
    except ValueError as exc:
        fail(str(exc), "source")

    truth = None
    if "u0" in data:
        try:
            u0 = SpectralVector(eig, _floats(data["u0"], "u0"))
        except ValueError as exc:
            fail(str(exc), "u0")
        truth = ManufacturedTruth(u0, source)

    phi = data["phi_tau"]
    try:
        if phi == "manufactured":
            if truth is None:
                fail("phi_tau: manufactured requires a u0 section", "phi_tau")
            phi_tau = ivp_mild_solution(truth.target_u0, source, tau)
        else:
            phi_tau = SpectralVector(eig, _floats(phi, "phi_tau"))
    except ProblemFileError:
        raise
    except ValueError as exc:
        fail(str(exc), "phi_tau")

    try:
        problem = FinalValueProblem(eig, tau, phi_tau, source, truth)
    except ValueError as exc:
        fail(str(exc), "source")

    sc = None
    if data.get("source_condition") is not None:
        try:
            sc = parse_source_condition(data["source_condition"])
        except ValueError as exc:
            fail(str(exc), "source_condition")

    noise = data.get("noise") or {}
    if not isinstance(noise, dict):
        fail("noise must be a mapping with delta/split/seed", "noise")
    for k, v in noise.items():
        if k not in ("delta", "split", "seed"):
            fail(f"unknown noise field {k!r}", "noise", k)
        try:
            noise[k] = int(v) if k == "seed" else _number(v, k)
        except (TypeError, ValueError) as exc:
            fail(str(exc), "noise", k)
    return ProblemSpec(problem, sc, noise, path)


def load_problem(path) -> ProblemSpec:
    with open(path) as fh:
        return loads_problem(fh.read(), str(path))


def dump_problem(
    problem: FinalValueProblem,
    source_condition: Optional[str] = None,
    noise: Optional[dict] = None,
) -> str:
    """Serialize a problem; ``u0`` is written when the truth is manufactured."""
    eig = problem.eigensystem
    label = eig.label or ""
    if label.startswith("dirichlet-laplacian-") and np.array_equal(
        eig.eigenvalues, make_dirichlet_laplacian(len(eig)).eigenvalues
    ):
        es = {"dirichlet_laplacian": len(eig)}
    else:
        es = {"eigenvalues": [float(x) for x in eig.eigenvalues]}
        if eig.label:
            es["label"] = eig.label
    modes = [format_mode(m) for m in problem.source.modes]
    if problem.source.is_zero:
        source = "zero"
    elif len(set(modes)) == 1:
        source = modes[0]
    else:
        source = modes
    doc = {"eigensystem": es, "tau": problem.tau,
           "phi_tau": [float(x) for x in problem.phi_tau.coefficients]}
    if isinstance(problem.truth, ManufacturedTruth):
        doc["u0"] = [float(x) for x in problem.truth.target_u0.coefficients]
    doc["source"] = source
    if source_condition:
        parse_source_condition(source_condition)
        doc["source_condition"] = source_condition
    if noise:
        doc["noise"] = dict(noise)
    header = "# final value problem u' + Au = f, u(tau) = phi_tau (spectral coordinates)\n"
    return header + yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)
