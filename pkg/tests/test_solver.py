import json
import math
from pathlib import Path

import numpy as np
import pytest

from choquard.energy import Problem
from choquard.mesh import build_mesh
from choquard.solver import (
    ConstantsReport,
    SolverError,
    SolverParams,
    ball_minimize,
    estimate_constants,
    fit_power_law,
    golden_section,
    lambda_threshold,
    mountain_pass,
    ps_monitor,
)
from choquard.vxnorm import x0_norm

from conftest import constant_fields

GOLDEN = Path(__file__).parent / "golden" / "constants_model.json"


def test_golden_constants(model_constants):
    ref = json.loads(GOLDEN.read_text())
    assert model_constants.c13 == pytest.approx(ref["c13"], rel=0, abs=1e-12)
    assert model_constants.c14 == pytest.approx(ref["c14"], rel=0, abs=1e-12)


def test_single_sample_gives_positive_constants(model_fields, mesh64):
    c = estimate_constants(model_fields, mesh64, samples=1, seed=3)
    assert 0 < c.c13 < math.inf and 0 < c.c14 < math.inf


def test_more_samples_never_lower_constants(model_fields, mesh64):
    a = estimate_constants(model_fields, mesh64, samples=25, seed=5)
    b = estimate_constants(model_fields, mesh64, samples=50, seed=5)
    assert b.c13 >= a.c13 and b.c14 >= a.c14


def test_estimate_constants_rejects_zero_samples(model_fields, mesh64):
    with pytest.raises(ValueError):
        estimate_constants(model_fields, mesh64, samples=0)


def test_golden_section_quadratic():
    assert golden_section(lambda z: (z - 1.25) ** 2, -10, 10) == pytest.approx(1.25, abs=1e-8)


def test_t0_is_minimizer(model_constants):
    lam = 0.1
    t0 = model_constants.t0(lam)
    T = model_constants.T
    assert T(lam, t0) <= T(lam, t0 * 1.01) and T(lam, t0) <= T(lam, t0 / 1.01)
    # stationarity of T in closed form
    c = model_constants
    a, b = c.alpha_lo - c.p_hi, 2 * c.r_lo - c.p_hi
    d = a * c.c14 * lam / c.alpha_lo * t0 ** (a - 1) + b * c.c13 * t0 ** (b - 1)
    assert abs(d) <= 1e-6 * c.c13 * b * t0 ** (b - 1)


def test_margin_positive_for_small_lambda(model_constants):
    assert model_constants.margin(1e-8) > 0
    assert model_constants.T_at_t0(1e-12) < model_constants.T_at_t0(1e-8)


def test_threshold_root_and_overshoot(model_constants):
    L = model_constants.Lambda
    assert model_constants.T_at_t0(L) == pytest.approx(1 / model_constants.p_hi, rel=1e-9)
    assert model_constants.margin(2 * L) < 0
    assert model_constants.margin(L / 2) > 0


def test_threshold_requires_exponent_order():
    c = ConstantsReport(c13=1.0, c14=1.0, alpha_lo=2.5, p_hi=2.0, r_lo=3.0, samples=1, seed=0)
    with pytest.raises(SolverError):
        lambda_threshold(c)


def test_power_law_slope(model_constants):
    slope, local = fit_power_law(model_constants)
    assert np.max(np.abs(local - slope)) <= 0.01 * abs(slope)
    c = model_constants
    assert slope == pytest.approx((2 * c.r_lo - c.p_hi) / (2 * c.r_lo - c.alpha_lo), rel=1e-6)


def test_mountain_pass_solution(model_pair, model_fields, mesh64):
    lam, delta, mp, _ = model_pair
    assert mp.converged and mp.classification == "mountainPass"
    assert mp.residual <= 1e-8
    assert mp.final_energy.total > 0
    assert mp.morse_index == 1
    assert mp.x0_norm > delta
    assert mp.ps.warning is None


def test_mountain_pass_weak_form(model_pair, model_fields, mesh64):
    lam, _, mp, _ = model_pair
    g = Problem(model_fields, mesh64).gradient(mp.final_u, lam)
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = rng.normal(size=64)
        assert abs(g @ w) <= 10 * 1e-8 * np.linalg.norm(w)


def test_ball_minimum(model_pair, model_fields, mesh64):
    lam, delta, mp, ball = model_pair
    assert ball.converged and ball.classification == "ballMinimum"
    assert ball.final_energy.total < 0
    assert ball.residual <= 1e-8
    assert ball.x0_norm <= delta * (1 + 1e-9)
    assert mp.final_energy.total > 0 > ball.final_energy.total
    assert x0_norm(mp.final_u - ball.final_u, model_fields.s, model_fields.p, mesh64) > 1e-6


def test_ball_descent_is_monotone(model_pair):
    J = [h[0] for h in model_pair[3].history]
    assert all(b <= a + 1e-12 for a, b in zip(J, J[1:]))


def test_iterates_stay_in_coercivity_bound(model_pair, model_fields, model_constants):
    # J >= (1/p+ - 1/Theta) ||u||^p- - lam-term growth; with J bounded the norms stay bounded
    lam, _, mp, ball = model_pair
    for rep in (mp, ball):
        norms = np.array([h[2] for h in rep.history])
        assert np.all(np.isfinite(norms)) and norms.max() < 1e3


def test_solver_is_deterministic(model_fields, mesh64, model_constants, model_pair):
    lam = model_pair[0]
    again = mountain_pass(SolverParams(lam=lam), model_fields, mesh64)
    assert again.history_csv() == model_pair[2].history_csv()
    assert np.array_equal(again.final_u, model_pair[2].final_u)


def test_history_and_solution_csv(model_pair, mesh64):
    mp = model_pair[2]
    lines = mp.history_csv().splitlines()
    assert lines[0] == "iter,J,residual,x0_norm" and len(lines) == len(mp.history) + 1
    sol = mp.solution_csv(mesh64).splitlines()
    assert sol[0] == "x1,u" and len(sol) == 65


def test_ball_minimize_needs_radius(model_fields, mesh64):
    with pytest.raises(SolverError):
        ball_minimize(SolverParams(lam=1.0), model_fields, mesh64)


@pytest.mark.parametrize("kw", [{"grad_tol": 0}, {"path_points": 2}, {"backtrack": 1.0}, {"lam": -1.0}])
def test_solver_params_validation(kw):
    with pytest.raises(ValueError):
        SolverParams(**kw)


def test_mountain_pass_at_lambda_zero(unit_interval):
    fs = constant_fields(s=0.4, p=2.0, mu=0.5, alpha=1.5, r=2.5)
    m = build_mesh(unit_interval, 24)
    rep = mountain_pass(SolverParams(lam=0.0), fs, m)
    assert rep.converged and rep.final_energy.total > 0


def test_ps_monitor_constant_history():
    s = ps_monitor([(1.0, 0.0, 2.0)] * 10)
    assert s.cauchy and s.warning is None


def test_ps_monitor_flags_diverging_norms():
    hist = [(1.0 + 1e-3 * (-1) ** m, 1.0 / m, float(m)) for m in range(1, 41)]
    assert ps_monitor(hist).warning is not None


def test_ps_monitor_converging_residuals():
    hist = [(2.0 + 2.0**-m, 2.0**-m, 1.0) for m in range(40)]
    s = ps_monitor(hist)
    assert s.cauchy and s.residual_vanishing and s.warning is None


def test_ps_monitor_empty():
    with pytest.raises(ValueError):
        ps_monitor([])


def test_ps_monitor_ignores_converging_norm_growth():
    hist = [(1.0, 2.0**-m, 3.0 - 2.0**-m) for m in range(40)]
    assert ps_monitor(hist).warning is None
