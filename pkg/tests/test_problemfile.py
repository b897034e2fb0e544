import math

import numpy as np
import pytest

from fvp_reglab.evolution import ModeFunction, SourceTerm, manufacture_problem
from fvp_reglab.problemfile import (
    ProblemFileError,
    dump_problem,
    format_mode,
    load_problem,
    loads_problem,
    parse_mode,
    parse_source_condition,
)
from fvp_reglab.spectral import EigenSystem, SpectralVector, make_dirichlet_laplacian

BASIC = """\
eigensystem: {dirichlet_laplacian: 3}
tau: 0.5
phi_tau: [1.0, 0.5, 0.25]
source: zero
"""


def test_parse_mode_grammar():
    assert parse_mode("const 2.5")(0.3) == 2.5
    m = parse_mode("exp 2 -1 + const 1")
    assert m(1.0) == pytest.approx(2 * math.exp(-1) + 1)
    s = parse_mode("samples [0, 1, 2] step 0.5")
    assert s(0.75) == pytest.approx(1.5)
    assert parse_mode("zero")(4.0) == 0.0
    with pytest.raises(ValueError):
        parse_mode("sin 3")


@pytest.mark.parametrize("text", ["const 0.25", "exp 1.5 -2.0", "const 1.0 + exp 0.5 3.0",
                                  "samples [0.0, 1.0, 4.0] step 0.25"])
def test_format_mode_round_trip(text):
    m = parse_mode(text)
    m2 = parse_mode(format_mode(m))
    for s in (0.0, 0.1, 0.37, 0.5):
        assert m2(s) == m(s)


def test_format_mode_rejects_callables():
    with pytest.raises(ValueError):
        format_mode(ModeFunction.from_callable(np.sin))


def test_parse_source_condition():
    assert parse_source_condition("exp gamma=2 rho=auto") == ("exp", 2.0, None)
    assert parse_source_condition("power p=1.5 rho=3") == ("power", 1.5, 3.0)
    for bad in ("exp rho=1", "gauss s=1 rho=1", "exp gamma=-1 rho=1", "exp gamma=1 rho=1 x=2"):
        with pytest.raises(ValueError):
            parse_source_condition(bad)


def test_loads_basic():
    spec = loads_problem(BASIC)
    p = spec.problem
    np.testing.assert_array_equal(p.eigensystem.eigenvalues, [1, 4, 9])
    assert p.tau == 0.5 and p.source.is_zero and p.truth is None
    assert spec.source_condition is None and spec.condition_at(0.0) is None


def test_manufactured_phi_from_u0():
    text = """\
eigensystem: {eigenvalues: [1.0, 2.0], label: two}
tau: 1.0
phi_tau: manufactured
u0: [1.0, 1.0]
source: [const 0.0, exp 1.0 -2.0]
source_condition: exp gamma=1 rho=auto
"""
    spec = loads_problem(text)
    p = spec.problem
    # mode 2: e^{-2} + int_0^1 e^{-2(1-s)} e^{-2s} ds = 2 e^{-2}
    np.testing.assert_allclose(p.phi_tau.coefficients, [math.exp(-1), 2 * math.exp(-2)], rtol=1e-14)
    sc = spec.condition_at(0.0)
    # ||e^{A} u0|| with u0 = (1, 1)
    assert sc.rho == pytest.approx(math.hypot(math.e, math.e**2), rel=1e-14)


@pytest.mark.parametrize("source", [None, SourceTerm.constant([0.1, -0.2, 0.3]),
                                    SourceTerm([ModeFunction.exponential(1.0, -1.0),
                                                ModeFunction.constant(0.5),
                                                ModeFunction.sampled(np.linspace(0, 1, 201), 0.0025)])])
def test_dump_load_round_trip(source, tmp_path):
    es = make_dirichlet_laplacian(3)
    p = manufacture_problem(es, 0.5, SpectralVector(es, [1.0, -0.5, 0.25]), source)
    path = tmp_path / "p.yaml"
    path.write_text(dump_problem(p, "exp gamma=1 rho=auto", {"delta": 1e-3, "seed": 4}))
    spec = load_problem(path)
    q = spec.problem
    np.testing.assert_array_equal(q.phi_tau.coefficients, p.phi_tau.coefficients)
    np.testing.assert_array_equal(q.truth(0.0).coefficients, p.truth(0.0).coefficients)
    for s in (0.0, 0.2, 0.5):
        np.testing.assert_array_equal(q.source(s), p.source(s))
    assert spec.noise == {"delta": 1e-3, "seed": 4}


def test_explicit_eigenvalues_round_trip():
    es = EigenSystem([0.5, 0.5, 3.0], label="custom")
    p = manufacture_problem(es, 1.0, SpectralVector(es, [1.0, 2.0, 3.0]))
    q = loads_problem(dump_problem(p)).problem
    np.testing.assert_array_equal(q.eigensystem.eigenvalues, es.eigenvalues)
    assert q.eigensystem.label == "custom"


@pytest.mark.parametrize(
    "text, line, field",
    [
        (BASIC.replace("tau: 0.5", "tau: -1"), 2, "tau"),
        (BASIC.replace("[1.0, 0.5, 0.25]", "[1.0, 0.5]"), 3, "phi_tau"),
        (BASIC.replace("source: zero", "source: wiggle 3"), 4, "source"),
        (BASIC + "source_condition: exp gamma=0 rho=1\n", 5, "source_condition"),
        (BASIC.replace("[1.0, 0.5, 0.25]", "[1.0, oops, 0.25]"), 3, "phi_tau"),
        (BASIC + "extra: 1\n", 5, "extra"),
        (BASIC.replace("eigensystem: {dirichlet_laplacian: 3}\n", ""), None, "eigensystem"),
    ],
)
def test_parse_errors_carry_line_and_field(text, line, field):
    with pytest.raises(ProblemFileError) as info:
        loads_problem(text, "prob.yaml")
    err = info.value
    assert err.field == field
    assert err.line == line
    if line is not None:
        assert str(err).startswith(f"prob.yaml:{line}:")


def test_yaml_syntax_error_has_line():
    with pytest.raises(ProblemFileError) as info:
        loads_problem("tau: [1, 2\nphi_tau: 3\n")
    assert info.value.line is not None


def test_rho_auto_needs_truth():
    spec = loads_problem(BASIC + "source_condition: exp gamma=1 rho=auto\n")
    with pytest.raises(ProblemFileError):
        spec.condition_at(0.0)
