import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hadamard_plateau.ambient_metric import AmbientMetric
from hadamard_plateau.disc_mesh import build_mesh, disc_automorphism
from hadamard_plateau.expansion import build_gamma_R, make_curve, solve_multilevel
from hadamard_plateau.plateau import (BoundaryCurve, DiscMap, PlateauOptions, capacity_check, conformality_defect,
                                      dirichlet_energy, energy_gradient, harmonic_extension, interior_area_check,
                                      radial_spherical_check, recenter, resample_map, solve_plateau, surface_area)

from conftest import planar_circle


def _flat_identity(level, metric=None):
    mesh = build_mesh(level)
    curve = planar_circle(1.0, n=6 * 2**level)
    return harmonic_extension(mesh, curve, metric or AmbientMetric.flat())


def _random_map(metric, level, seed, scale=0.3, jitter=0.03):
    mesh = build_mesh(level)
    m = harmonic_extension(mesh, planar_circle(scale, n=6 * 2**level), metric)
    rng = np.random.default_rng(seed)
    return m.with_positions(m.positions + jitter * rng.standard_normal(m.positions.shape))


def test_boundary_curve_arclength():
    c = planar_circle(2.0, n=64)
    assert c.L == pytest.approx(64 * 2 * 2.0 * math.sin(math.pi / 64))
    assert np.allclose(c(0.0), [2.0, 0, 0])
    assert np.allclose(c(c.L), c(0.0))
    assert c.is_simple()


def test_figure_eight_not_simple():
    t = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    fig8 = BoundaryCurve(np.column_stack([np.sin(t), np.sin(t) * np.cos(t), 0 * t]))
    assert not fig8.is_simple()


def test_boundary_curve_rejects_repeats():
    with pytest.raises(ValueError, match="repeated"):
        BoundaryCurve(np.array([[0, 0, 0], [1, 0, 0], [1, 0, 0], [0, 1, 0]], float))


def test_constant_map_has_zero_energy(hyperbolic):
    m = _flat_identity(2, hyperbolic[2])
    c = m.with_positions(np.full_like(m.positions, 0.1))
    assert dirichlet_energy(c) == 0.0
    assert conformality_defect(c) == 0.0


def test_identity_harmonic_extension_is_polygon_area():
    m = _flat_identity(3)
    assert np.allclose(m.positions[:, :2], m.mesh.vertices, atol=1e-12)
    assert dirichlet_energy(m) == pytest.approx(24 * math.sin(2 * math.pi / 48), rel=1e-12)
    assert conformality_defect(m) == pytest.approx(0.0, abs=1e-12)


def test_affine_stretch_defect():
    m = _flat_identity(3)
    A = surface_area(m)
    X = m.positions.copy()
    X[:, 0] *= 2
    s = m.with_positions(X)
    assert dirichlet_energy(s) == pytest.approx(2.5 * A, rel=1e-12)
    assert surface_area(s) == pytest.approx(2 * A, rel=1e-12)
    assert conformality_defect(s) == pytest.approx(0.5 * A, rel=1e-10)


def test_small_scale_energy_is_four_times_euclidean(hyperbolic):
    m = _flat_identity(3, hyperbolic[2])
    small = m.with_positions(1e-3 * m.positions)
    assert dirichlet_energy(small) / dirichlet_energy(small, euclidean=True) == pytest.approx(4.0, rel=1e-5)


def test_unsafe_positions_rejected(hyperbolic):
    m = _flat_identity(2, hyperbolic[2])
    with pytest.raises(ValueError, match="outside the safe ball"):
        dirichlet_energy(m)


@pytest.mark.parametrize("seed", range(3))
def test_gradient_matches_finite_differences(hyperbolic, seed):
    m = _random_map(hyperbolic[2], 2, seed)
    _, g = energy_gradient(m)
    rng = np.random.default_rng(seed + 10)
    h = 1e-6
    for _ in range(10):
        v, d = rng.integers(len(m.positions)), rng.integers(3)
        Xp, Xm = m.positions.copy(), m.positions.copy()
        Xp[v, d] += h
        Xm[v, d] -= h
        fd = (dirichlet_energy(m.with_positions(Xp)) - dirichlet_energy(m.with_positions(Xm))) / (2 * h)
        assert abs(fd - g[v, d]) <= 1e-6 * max(abs(g[v, d]), 1e-3 * np.abs(g).max())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 0.6))
def test_energy_dominates_area(seed, scale):
    from conftest import _metric_k1
    m = _random_map(_metric_k1(), 2, seed, scale=scale, jitter=0.02)
    assert dirichlet_energy(m) >= surface_area(m) - 1e-12


def test_equator_level3_frozen(hyperbolic):
    _, model, metric = hyperbolic
    gamma = build_gamma_R(make_curve("equator"), model, 3.0)
    res = solve_plateau(gamma, build_mesh(3), metric)
    assert res.converged
    assert res.energy == pytest.approx(66.12506068882726, rel=1e-6)
    assert res.area == pytest.approx(64.5385465412236, rel=1e-6)
    assert res.area <= res.energy
    m = res.map
    assert np.allclose(m.boundary_positions, gamma(m.boundary_params), atol=1e-14)
    eps = gamma.L * 1e-4 / len(m.mesh.boundary_loop)
    assert np.all(m.gaps() >= eps * (1 - 1e-9))
    assert m.gaps().sum() == pytest.approx(gamma.L)


def test_tiny_circle_is_flat_disc(hyperbolic):
    metric = hyperbolic[2]
    r = 1e-3
    res = solve_plateau(planar_circle(r, n=256), build_mesh(3), metric)
    assert res.converged
    assert np.max(np.abs(res.map.positions[:, 2])) < 1e-12
    assert res.energy / dirichlet_energy(res.map, euclidean=True) == pytest.approx(4.0, rel=1e-5)


def test_prior_map_init_agrees(hyperbolic):
    _, model, metric = hyperbolic
    gamma = build_gamma_R(make_curve("tilted-circle"), model, 1.5)
    direct = solve_plateau(gamma, build_mesh(3), metric)
    warm = solve_multilevel(gamma, 3, metric, PlateauOptions(), coarse_level=1)
    assert warm.energy == pytest.approx(direct.energy, rel=1e-5)


def test_unknown_init_rejected(hyperbolic):
    with pytest.raises(ValueError, match="unknown init"):
        solve_plateau(planar_circle(0.5), build_mesh(1), hyperbolic[2], init="zero")


def test_equator_solution_properties(equator_disc):
    res = equator_disc
    m = res.map
    assert res.converged
    assert np.max(np.abs(m.positions[:, 2])) <= 1e-3
    assert res.conformality_defect / res.energy <= 1e-3
    rs = radial_spherical_check(m)
    assert rs["max_excess"] <= 0.05
    cap = capacity_check(m, a=1.0)
    assert cap["passed"] and cap["capacity"] == pytest.approx(math.pi / math.log(2))
    ia = interior_area_check(m, (0.2, 0.1), 0.3)
    assert ia["passed"]


def test_recenter_identity_on_centered_map(equator_disc):
    m, info = recenter(equator_disc.map)
    assert not info["moved"] and m is equator_disc.map


def test_recenter_restores_pushed_map(hyperbolic):
    _, model, metric = hyperbolic
    gamma = build_gamma_R(make_curve("equator"), model, 2.0)
    res = solve_plateau(gamma, build_mesh(4), metric)
    fwd, _ = disc_automorphism(0.3 + 0.2j)
    pushed = resample_map(res.map, warp=fwd)
    back, info = recenter(pushed)
    assert info["moved"]
    # within one mesh cell of the original centre image (which is the origin)
    assert np.linalg.norm(pushed.positions[0]) > 0.2
    assert np.linalg.norm(back.positions[0]) <= back.mesh.h * float(model.g(2.0))
