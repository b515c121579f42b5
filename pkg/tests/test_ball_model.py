import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hadamard_plateau.ball_model import build_ball_model, check_polar_identity, exp_point
from hadamard_plateau.comparison_ode import CurvatureProfile, solve_comparison


def test_poincare_transfer_function(hyperbolic):
    _, model, _ = hyperbolic
    r = np.linspace(0, 10, 501)
    assert np.max(np.abs(model.g(r) - np.tanh(r / 2))) <= 1e-8


def test_conformal_factor_matches_poincare(hyperbolic):
    _, model, _ = hyperbolic
    t = np.linspace(0, 0.999, 400)
    exact = 2 / (1 - t**2)
    assert np.max(np.abs(model.fprime(t) - exact) / exact) <= 1e-6


def test_frozen_values(hyperbolic):
    _, model, _ = hyperbolic
    assert model.g(1.0) == pytest.approx(0.46211715726000974, rel=1e-9)
    assert model.fprime(0.5) == pytest.approx(8.0 / 3.0, rel=1e-8)


def test_inverse_roundtrip(hyperbolic):
    _, model, _ = hyperbolic
    r = np.linspace(0.01, 8, 200)
    assert np.allclose(model.f(model.g(r)), r, rtol=1e-9)


def test_margin_rejected(hyperbolic):
    _, model, _ = hyperbolic
    with pytest.raises(ValueError, match="margin"):
        model.fprime(1.0)


def test_tail_bracket_demands_larger_window():
    sol = solve_comparison(CurvatureProfile.constant(-1.0), 5.0)
    with pytest.raises(ValueError, match="raise s_max"):
        build_ball_model(sol)


def test_zero_bound_rejected():
    sol = solve_comparison(CurvatureProfile.constant(0.0), 5.0)
    with pytest.raises(ValueError):
        build_ball_model(sol)


def test_polar_identity(hyperbolic):
    _, model, _ = hyperbolic
    assert check_polar_identity(model)["max_rel_err"] <= 1e-6


def test_exp_point_direction_check(hyperbolic):
    _, model, _ = hyperbolic
    with pytest.raises(ValueError):
        exp_point(model, [1.0, 1.0, 0.0], 1.0)
    p = exp_point(model, [0.0, 0.0, 1.0], 2.0)
    assert p[2] == pytest.approx(np.tanh(1.0), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 9.0))
def test_g_is_increasing_and_below_one(r):
    sol = solve_comparison(CurvatureProfile.constant(-1.0), 24.0)
    model = build_ball_model(sol)
    g0, g1 = model.g(r), model.g(r * 1.01)
    assert 0 < g0 < g1 < 1


@settings(max_examples=20, deadline=None)
@given(st.floats(0.6, 2.5), st.floats(0.05, 6.0))
def test_gprime_times_fprime_is_one(a, r):
    sol = solve_comparison(CurvatureProfile.constant(-a * a), 30.0 / a)
    model = build_ball_model(sol)
    t = model.g(r)
    assert model.gprime(r) * model.fprime(t) == pytest.approx(1.0, rel=1e-6)
