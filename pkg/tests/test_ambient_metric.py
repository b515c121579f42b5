import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hadamard_plateau.ambient_metric import (AmbientMetric, SurfacePatch, geodesic_radius, jacobi_norm_check,
                                             make_perturbation, metric_tensor, patch_area)
from hadamard_plateau.ball_model import build_ball_model
from hadamard_plateau.comparison_ode import CurvatureProfile, solve_comparison
from hadamard_plateau.disc_mesh import build_mesh


def _disc_patch(radius, level):
    mesh = build_mesh(level)
    X = np.zeros((len(mesh.vertices), 3))
    X[:, :2] = radius * mesh.vertices
    return SurfacePatch(X[mesh.triangles])


def test_tensor_at_origin_and_half(hyperbolic):
    _, _, metric = hyperbolic
    assert np.allclose(metric_tensor(metric, [0, 0, 0]), 4 * np.eye(3), rtol=1e-9)
    assert np.allclose(metric_tensor(metric, [0.5, 0, 0]), (64 / 9) * np.eye(3), rtol=1e-7)


def test_identity_perturbation_matches_plain(hyperbolic):
    _, model, metric = hyperbolic
    pm = AmbientMetric(model, make_perturbation("identity"))
    x = np.array([[0.1, -0.3, 0.2], [0.0, 0.4, 0.5]])
    assert np.allclose(pm.tensor(x), metric.tensor(x))


def test_outside_ball_rejected(hyperbolic):
    _, _, metric = hyperbolic
    with pytest.raises(ValueError):
        metric_tensor(metric, [1.0, 0, 0])
    with pytest.raises(ValueError):
        metric.check_inside(np.array([[0.0, 0.0, 0.9999999999]]))


def test_geodesic_radius_oracles(hyperbolic):
    _, model, metric = hyperbolic
    assert geodesic_radius(metric, [0, 0, 0]) == 0.0
    assert geodesic_radius(metric, [math.tanh(1.0), 0, 0]) == pytest.approx(2.0, rel=1e-9)
    assert geodesic_radius(metric, [0, float(model.g(5.0)), 0]) == pytest.approx(5.0, rel=1e-9)


def test_equatorial_disc_area_converges(hyperbolic):
    _, model, metric = hyperbolic
    exact = 2 * math.pi * (math.cosh(1.0) - 1)
    err = abs(patch_area(metric, _disc_patch(float(model.g(1.0)), 4)) - exact)
    assert err / exact < 2e-3


def test_patch_area_second_order_under_refinement(hyperbolic):
    _, _, metric = hyperbolic
    patch = SurfacePatch(np.array([[[0.2, 0.1, 0.0], [0.7, 0.2, 0.1], [0.3, 0.6, -0.1]]]))
    A = [patch_area(metric, patch, refine=k) for k in range(6)]
    diffs = np.abs(np.diff(A))
    assert np.all(diffs[1:] / diffs[:-1] < 0.3)


def test_small_triangle_scales_by_four(hyperbolic):
    _, _, metric = hyperbolic
    tri = 1e-4 * np.array([[[0, 0, 0], [1, 0, 0], [0, 1, 0]]], float)
    ratio = patch_area(metric, SurfacePatch(tri)) / 0.5e-8
    assert ratio == pytest.approx(4.0, rel=1e-6)


def test_b_only_area_is_euclidean_for_identity(hyperbolic):
    _, _, metric = hyperbolic
    patch = _disc_patch(0.5, 3)
    flat = patch_area(AmbientMetric.flat(), patch)
    assert patch_area(metric, patch, b_only=True) == pytest.approx(flat, rel=1e-12)


def test_degenerate_triangles_skipped_with_warning(hyperbolic):
    _, _, metric = hyperbolic
    tri = np.array([[[0, 0, 0], [0.1, 0, 0], [0.2, 0, 0]], [[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0]]], float)
    with pytest.warns(RuntimeWarning, match="degenerate"):
        a = patch_area(metric, SurfacePatch(tri))
    assert a > 0


@pytest.mark.parametrize("k,expected", [(-1.0, math.sinh(1.0)), (-4.0, math.sinh(2.0) / 2)])
def test_jacobi_norm_matches_F(k, expected):
    sol = solve_comparison(CurvatureProfile.constant(k), 24.0 / math.sqrt(-k))
    metric = AmbientMetric(build_ball_model(sol))
    rep = jacobi_norm_check(metric, [0.0, 0.0, 1.0], 1.0)
    assert rep["numeric"] == pytest.approx(expected, rel=1e-8)


def test_jacobi_small_radius_normalisation(hyperbolic):
    _, _, metric = hyperbolic
    rep = jacobi_norm_check(metric, [1.0, 0.0, 0.0], 1e-3)
    assert rep["numeric"] / 1e-3 == pytest.approx(1.0, rel=1e-6)


def test_jacobi_rejects_tiny_step(hyperbolic):
    with pytest.raises(ValueError, match="precision floor"):
        jacobi_norm_check(hyperbolic[2], [1.0, 0, 0], 1.0, h=1e-10)


def test_unknown_perturbation():
    with pytest.raises(ValueError, match="unknown perturbation"):
        make_perturbation("twist")


@pytest.mark.parametrize("name", ["diagonal-bump", "rotation-shear"])
def test_perturbation_bounds_spot_check(name):
    p = make_perturbation(name, eps=0.3)
    assert p.spot_check(3, samples=512)["passed"]


def test_radial_unit_speed(hyperbolic):
    _, model, metric = hyperbolic
    r = 3.0
    t = np.linspace(0, float(model.g(r)), 20001)
    mid = 0.5 * (t[1:] + t[:-1])
    length = np.sum(np.sqrt(metric.lam2(np.column_stack([mid, 0 * mid, 0 * mid]))) * np.diff(t))
    assert length == pytest.approx(r, rel=1e-6)


unit_points = st.tuples(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))


@settings(max_examples=40, deadline=None)
@given(unit_points, st.sampled_from(["diagonal-bump", "rotation-shear"]))
def test_perturbed_tensor_spd_and_sandwiched(hyperbolic, x, name):
    _, model, metric = hyperbolic
    pm = AmbientMetric(model, make_perturbation(name, eps=0.3))
    x = np.array([x])
    G, G0 = pm.tensor(x)[0], metric.tensor(x)[0]
    assert np.allclose(G, G.T)
    ev = np.linalg.eigvalsh(np.linalg.solve(G0, G))
    lo, hi = pm.b_bounds
    assert ev.min() >= lo - 1e-12 and ev.max() <= hi + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 3.0))
def test_conformal_homogeneity_of_b_area(c):
    patch = _disc_patch(0.4, 2)
    flat = AmbientMetric.flat()
    scaled = SurfacePatch(c * patch.triangles)
    assert patch_area(flat, scaled) == pytest.approx(c * c * patch_area(flat, patch), rel=1e-12)
