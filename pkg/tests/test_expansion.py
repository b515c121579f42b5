import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hadamard_plateau.ambient_metric import AmbientMetric, make_perturbation
from hadamard_plateau.disc_mesh import build_mesh
from hadamard_plateau.expansion import (ExpansionOptions, blowup_rescale, boundary_coverage, build_gamma_R,
                                        collar_gap, concentration_fixture, cone_area_check, detect_concentration,
                                        make_curve, modified_curve_threshold, notched_circle, run_blowup,
                                        run_expansion)
from hadamard_plateau.plateau import DiscMap, PlateauOptions, harmonic_extension, solve_plateau
from hadamard_plateau.verification import asymptotic_boundary_check

from conftest import planar_circle


def _rot(angle, axis):
    c, s = math.cos(angle), math.sin(angle)
    i, j = [k for k in range(3) if k != axis]
    Q = np.eye(3)
    Q[i, i], Q[i, j], Q[j, i], Q[j, j] = c, -s, s, c
    return Q


@pytest.mark.parametrize("name,L", [("equator", 2 * math.pi), ("tilted-circle", 5.856174215275663),
                                    ("torus-knot-projection", 7.344279483848413)])
def test_builtin_curves(name, L):
    c = make_curve(name)
    assert np.allclose(np.linalg.norm(c.samples, axis=1), 1.0, atol=1e-12)
    assert c.L == pytest.approx(L, rel=1e-9)
    assert c.is_simple()


def test_unknown_curve():
    with pytest.raises(ValueError, match="unknown curve"):
        make_curve("trefoil")


def test_gamma_R_equator(hyperbolic):
    _, model, _ = hyperbolic
    c = make_curve("equator")
    gam = build_gamma_R(c, model, 2.0)
    assert np.allclose(np.linalg.norm(gam.samples, axis=1), math.tanh(1.0))
    assert gam.L / c.chord_length == pytest.approx(float(model.g(2.0)), rel=1e-12)
    far = build_gamma_R(c, model, 20.0)
    assert np.max(np.abs(far.samples - c.samples)) < 1e-8
    with pytest.raises(ValueError):
        build_gamma_R(c, model, 0.0)


def test_cone_area_equator(hyperbolic):
    _, model, _ = hyperbolic
    c = make_curve("equator")
    rep = cone_area_check(c, model, 2.0)
    assert rep["cone_area"] == pytest.approx(2 * math.pi * (math.cosh(2) - 1), rel=1e-6)
    assert cone_area_check(c, model, 0.0)["cone_area"] == 0.0
    assert cone_area_check(c, model, 1e-3)["cone_area"] < 1e-5


def test_cone_area_perturbed_sandwich(hyperbolic):
    _, model, _ = hyperbolic
    metric = AmbientMetric(model, make_perturbation("rotation-shear", eps=0.3))
    rep = cone_area_check(make_curve("tilted-circle"), model, 2.0, metric=metric)
    assert rep["sandwich_pass"]


def test_collar_gap_value(hyperbolic):
    _, model, _ = hyperbolic
    g = math.tanh(1.5)
    assert collar_gap(model, 3.0) == pytest.approx((1 - g) / g, rel=1e-9)


def test_single_entry_schedule(hyperbolic):
    _, _, metric = hyperbolic
    led = run_expansion(make_curve("equator"), [1.0], metric, opts=ExpansionOptions(level=3))
    assert len(led.entries) == 1
    assert led.E0 == led.entries[0]["euclidean_energy"]


def test_schedule_must_increase(hyperbolic):
    with pytest.raises(ValueError, match="increasing"):
        run_expansion(make_curve("equator"), [2.0, 1.0], hyperbolic[2])


@pytest.fixture(scope="module")
def equator_ledger(hyperbolic):
    _, _, metric = hyperbolic
    return run_expansion(make_curve("equator"), [1.0, 2.0, 3.0], metric, opts=ExpansionOptions(level=3))


def test_equator_expansion_is_flat(equator_ledger):
    for e, m in zip(equator_ledger.entries, equator_ledger.maps):
        assert e["converged"]
        assert np.max(np.abs(m.positions[:, 2])) < 1e-8
        assert e["concentration"] is None
        assert e["area_bound_pass"] and e["ten"]["passed"] and e["capacity"]["passed"]
        for row in e["area_table"]:
            if row["s"] <= e["R"] - 1 + 1e-12:
                assert row["ratio"] == pytest.approx(2 * math.pi, rel=0.02)
    E = [e["euclidean_energy"] for e in equator_ledger.entries]
    assert equator_ledger.E0 >= max(E)


def test_equator_boundary_containment(equator_ledger):
    rep = asymptotic_boundary_check(equator_ledger, make_curve("equator"))
    assert rep["passed"]
    for row in rep["rows"]:
        assert row["hausdorff"] <= row["resolution"]


def test_ledger_serialisation(equator_ledger, tmp_path):
    equator_ledger.to_json(tmp_path / "l.json")
    equator_ledger.to_csv(tmp_path / "l.csv")
    header = (tmp_path / "l.csv").read_text().splitlines()[0]
    assert header == "R,energy,area,defect,s,area_s,bound_s,ratio_s"


def test_rotational_equivariance(hyperbolic):
    _, model, metric = hyperbolic
    c = make_curve("tilted-circle", n=1024)
    Q = _rot(0.7, 0) @ _rot(1.1, 2)
    e1 = solve_plateau(build_gamma_R(c, model, 1.0), build_mesh(3), metric).energy
    e2 = solve_plateau(build_gamma_R(c.rotated(Q), model, 1.0), build_mesh(3), metric).energy
    assert e2 == pytest.approx(e1, rel=1e-7)


def test_warm_start_matches_scratch(hyperbolic):
    _, model, metric = hyperbolic
    c = make_curve("tilted-circle", n=1024)
    led = run_expansion(c, [1.0, 1.5], metric, opts=ExpansionOptions(level=3, collar=False))
    scratch = solve_plateau(build_gamma_R(c, model, 1.5), build_mesh(3), metric)
    assert led.entries[-1]["energy"] == pytest.approx(scratch.energy, rel=1e-5)


def _step_map(width=0.01, level=4):
    mesh = build_mesh(level)
    curve = planar_circle(0.5, n=512)
    th = np.mod(np.arctan2(*mesh.vertices[mesh.boundary_loop][:, ::-1].T), 2 * np.pi)
    L = curve.L
    # smoothed step at pi plus a small linear part keeping the total increase below L
    lin = 1e-3 * L
    t = (L - lin) * (0.5 + 0.5 * np.tanh((th - np.pi) / width)) + lin * th / (2 * np.pi)
    m = harmonic_extension(mesh, curve, AmbientMetric.flat(), boundary_params=t)
    return m


def test_uniform_parametrisation_no_event(equator_ledger):
    assert detect_concentration(equator_ledger.maps[-1]) is None


def test_step_parametrisation_event():
    ev = detect_concentration(_step_map())
    assert ev is not None
    assert ev["theta"] == pytest.approx(math.pi, abs=0.02)
    assert ev["covered_fraction"] > 0.99


def test_concentration_fixture_blowup():
    m = concentration_fixture(level=4)
    ev = detect_concentration(m, window=0.25)
    assert ev["theta"] == pytest.approx(math.pi, abs=1e-9)
    assert ev["covered_fraction"] == pytest.approx(0.94694, abs=1e-4)
    new, info = blowup_rescale(m, ev, k_index=8)
    assert info["coverage_after"] >= 0.5
    assert info["energy_discarded"] > 0
    assert info["energy_discarded"] == pytest.approx(0.0025230187048626, rel=1e-6)
    assert info["energy_retained"] + info["energy_discarded"] == pytest.approx(info["energy_total"], rel=1e-12)
    assert info["cut_arc_length"] <= math.sqrt(8 * math.pi * info["energy_total"] / math.log(8))
    assert 1 / 8 < info["r"] < 1 / math.sqrt(8)
    assert np.allclose(new.boundary_positions, new.curve(new.boundary_params), atol=1e-12)


def test_blowup_needs_event():
    with pytest.raises(ValueError, match="no concentration"):
        blowup_rescale(concentration_fixture(level=2), None)


def test_blowup_deterministic():
    runs = [run_blowup(concentration_fixture(level=4), k_index=8, threshold=0.9, window=0.25)[1] for _ in range(2)]
    a, b = runs
    assert len(a) >= 1
    assert [x["energy_discarded"] for x in a] == [x["energy_discarded"] for x in b]
    assert [x["coverage_after"] for x in a] == [x["coverage_after"] for x in b]
    assert sum(x["energy_discarded"] for x in a) <= a[0]["energy_total"]


def test_boundary_coverage_uniform():
    m = harmonic_extension(build_mesh(3), planar_circle(0.5, 48), AmbientMetric.flat())
    assert boundary_coverage(m, mass=0.9) == pytest.approx(0.9, abs=0.01)


def test_modified_curve_threshold_baseline():
    rho = 0.5
    rep = modified_curve_threshold([planar_circle(rho, n=1024)], 0.0, 0.0, level=4)
    assert rep["floor"] == rep["baseline"]
    assert rep["a0"] == pytest.approx(math.pi * rho**2, rel=2e-3)


def test_notched_circle_area_floor():
    rho, eps = 0.5, 0.05
    rep = modified_curve_threshold([planar_circle(rho, n=1024), notched_circle(rho, eps, n=1024)], eps, 0.0,
                                   level=4, baseline=math.pi * rho**2)
    assert rep["passed"]


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(-0.5, 0.5))
def test_gap_sum_and_coverage_bounds(mass, shift):
    m = _step_map(width=0.3, level=2)
    cov = boundary_coverage(m, mass=mass)
    assert 0 < cov <= 1
    assert m.gaps().sum() == pytest.approx(m.curve.L)
