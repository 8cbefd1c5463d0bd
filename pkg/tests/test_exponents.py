import numpy as np
import pytest

from choquard.exponents import (
    FieldError,
    FieldSet,
    OnePointField,
    TwoPointField,
    check_r_admissible,
    critical_exponent,
    field_extrema,
    q_from_mu,
    theta_interval,
    validate_assumptions,
)
from choquard.mesh import DomainSpec, build_mesh

from conftest import constant_fields


@pytest.fixture(scope="module")
def square():
    return build_mesh(DomainSpec.box([0.0, 0.0], [1.0, 1.0]), 8, pad_factor=1.0)


def test_constant_extrema(mesh8):
    e = field_extrema(TwoPointField("2", "p", 1), mesh8)
    assert (e.lo, e.hi) == (2.0, 2.0)


def test_s_minimum_on_diagonal(unit_interval):
    m = build_mesh(unit_interval, 16, pad_factor=1.0)
    e = field_extrema(TwoPointField("0.5 + 0.1*abs(x1 - y1)", "s", 1), m)
    assert e.lo == pytest.approx(0.5, abs=1e-15)
    x, y = e.argmin
    assert x == y


def test_p_maximum_near_three(mesh64):
    e = field_extrema(TwoPointField("2 + sin(pi*x1)*sin(pi*y1)", "p", 1), mesh64)
    assert 2.99 < e.hi <= 3.0
    x, y = e.argmax
    assert abs(np.sin(np.pi * x[0]) * np.sin(np.pi * y[0])) > 0.99


def test_extrema_never_shrink_under_refinement(unit_interval):
    f = TwoPointField("2 + 0.3*sin(3*x1)*cos(2*y1) + 0.1*x1*y1", "p", 1)
    prev = None
    for n in (8, 16, 32):
        e = field_extrema(f, build_mesh(unit_interval, n, pad_factor=1.0))
        if prev is not None:
            assert e.lo <= prev.lo and e.hi >= prev.hi
        prev = e


def test_non_finite_field_reports_witness(mesh8):
    with pytest.raises(FieldError) as info:
        field_extrema(OnePointField("1/(x1 - 0.0625)", "r", 1), mesh8)
    assert info.value.witness is not None


def test_two_point_field_is_exactly_symmetric(rng):
    f = TwoPointField("x1^2*y1 + sin(x1 - 3*y1)", "p", 1)
    X = rng.uniform(-2, 2, (50, 1))
    Y = rng.uniform(-2, 2, (50, 1))
    assert np.array_equal(f(X, Y), f(Y, X))


def test_one_point_field_rejects_y():
    with pytest.raises(ValueError):
        OnePointField("x1 + y1", "r", 1)


@pytest.mark.parametrize("mu, N, q", [(1.0, 2, 4 / 3), (2.0, 2, 2.0), (0.5, 1, 4 / 3)])
def test_q_from_mu(mu, N, q, mesh8):
    Q = q_from_mu(TwoPointField(repr(mu), "mu", N), N)
    X = np.zeros((1, N))
    assert Q(X, X)[0] == pytest.approx(q, rel=1e-15)


def test_q_tends_to_one_for_small_mu(square):
    fs = constant_fields(N=2, s=0.5, p=2.0, mu=1e-12, r=2.5)
    rep = validate_assumptions(fs, square)
    assert rep.derived["q-"] == pytest.approx(1.0, abs=1e-9)
    assert rep["mu1:mu->0"].passed  # still positive, q barely above 1


def test_q_identity_on_pairs(unit_interval):
    m = build_mesh(unit_interval, 16, pad_factor=1.0)
    mu = TwoPointField("0.3 + 0.2*sin(x1*y1)", "mu", 1)
    X = m.nodes[:, None, :]
    Y = m.nodes[None, :, :]
    ident = 2 / q_from_mu(mu, 1)(X, Y) + mu(X, Y) / 1
    assert np.max(np.abs(ident - 2)) <= 1e-14


@pytest.mark.parametrize("N, p, s, expected", [(2, 2.0, 0.5, 4.0), (1, 2.0, 0.4, 10.0), (2, 2.0, 1e-9, 2.0)])
def test_critical_exponent(N, p, s, expected):
    P = TwoPointField(repr(p), "p", N)
    S = TwoPointField(repr(s), "s", N)
    assert critical_exponent(P, S, np.zeros(N), N) == pytest.approx(expected, rel=1e-8)


def test_critical_exponent_undefined():
    with pytest.raises(FieldError):
        critical_exponent(TwoPointField("2", "p", 1), TwoPointField("0.5", "s", 1), np.zeros(1), 1)


def _r_checks(square, r):
    fs = constant_fields(N=2, s=0.5, p=2.0, mu=1.0, r=r)
    return {c.name: c for c in check_r_admissible(fs.r, fs.q, fs.p, fs.s, square)}


def test_r_admissible_chain(square):
    checks = _r_checks(square, 2.5)
    assert all(c.passed for c in checks.values())
    assert checks["M:p(x,x)<=r*q-"].value == pytest.approx(10 / 3)


def test_r_too_large(square):
    c = _r_checks(square, 3.1)["M:r*q+<p_s*"]
    assert not c.passed
    assert c.value == pytest.approx(4.1333333, rel=1e-6)
    assert c.witness is not None


def test_r_below_p_plus(square):
    c = _r_checks(square, 1.4)["F1:r->p+"]
    assert not c.passed and c.witness is not None


def test_theta_interval(square):
    fs = constant_fields(N=2, s=0.5, p=2.0, r=2.5, mu=1.0)
    assert theta_interval(fs.r, fs.p, square) == (2.0, 5.0)


@pytest.mark.parametrize("p, r", [(3.0, 1.4), (2.0, 1.0)])
def test_theta_interval_empty(square, p, r):
    fs = constant_fields(N=2, s=0.2, p=p, r=r)
    with pytest.raises(FieldError):
        theta_interval(fs.r, fs.p, square)


def test_theta_interval_empty_when_r_equals_p_plus(square):
    # 2r- > p+ still holds, but r- > p+ fails
    fs = constant_fields(N=2, s=0.2, p=2.0, mu=1.0, r=2.0)
    rep = validate_assumptions(fs, square)
    assert not rep["F1:r->p+"].passed


def test_validate_two_dimensional_constants(square):
    fs = constant_fields(N=2, s=0.5, p=2.0, mu=1.0, alpha=1.5, r=2.5)
    rep = validate_assumptions(fs, square)
    assert rep.passed, rep.table()
    assert rep.theta == 5.0
    assert rep.derived["s+"] * rep.derived["p+"] == pytest.approx(1.0)


def test_validate_p1_failure(square):
    fs = constant_fields(N=2, s=0.6, p=4.0, mu=1.0, alpha=1.5, r=5.0)
    rep = validate_assumptions(fs, square)
    c = rep["P1:s+p+<N"]
    assert not c.passed
    assert c.value == pytest.approx(2.4)
    assert c.witness is not None


def test_validate_mu_failure(square):
    fs = constant_fields(N=2, s=0.5, p=2.0, mu=2.5)
    rep = validate_assumptions(fs, square)
    assert not rep["mu1:mu+<N"].passed
    assert not rep["q1:q-in-C+"].passed


def test_validate_model(model_fields, mesh64):
    rep = validate_assumptions(model_fields, mesh64)
    assert rep.passed, rep.table()
    assert rep.derived["p-"] == pytest.approx(1.8, abs=1e-3)
    assert rep.derived["p+"] == pytest.approx(2.2, abs=1e-3)


def test_validate_is_deterministic(model_fields, mesh64):
    a = validate_assumptions(model_fields, mesh64).table()
    b = validate_assumptions(model_fields, mesh64).table()
    assert a == b


def test_failures_always_carry_witness(square):
    fs = constant_fields(N=2, s=0.6, p=4.0, mu=2.5, alpha=4.5, r=1.2)
    rep = validate_assumptions(fs, square)
    assert rep.failures()
    for c in rep.failures():
        assert c.witness is not None or c.value is not None


def test_discontinuous_field_flagged(unit_interval):
    m = build_mesh(unit_interval, 32, pad_factor=1.0)
    fs = FieldSet.from_strings(1, "0.3 + 0.2*max(0, min(1, 1000*(x1 - 0.5)))", "2", "0.5", "1.5", "2.5")
    rep = validate_assumptions(fs, m)
    assert not rep["continuity:s"].passed
