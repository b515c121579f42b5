"""Acceptance criteria at their stated tolerances; one PASS/FAIL line each."""
import json
import math
import time

import numpy as np
import pytest

from hadamard_plateau.ambient_metric import AmbientMetric, make_perturbation
from hadamard_plateau.ball_model import build_ball_model
from hadamard_plateau.cli import main as cli_main
from hadamard_plateau.comparison_ode import (CurvatureProfile, check_G_over_sF, check_growth_ratios,
                                             check_ratio_bound, ratio_constant_C, solve_comparison)
from hadamard_plateau.disc_mesh import build_mesh
from hadamard_plateau.expansion import (ExpansionOptions, blowup_rescale, boundary_coverage, concentration_fixture,
                                        cone_area_check, detect_concentration, make_curve, run_blowup,
                                        run_expansion)
from hadamard_plateau.plateau import capacity_check, dirichlet_energy, energy_gradient, harmonic_extension
from hadamard_plateau.verification import monotonicity_report

from conftest import ACCEPTANCE_LINES, planar_circle


def record(num: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {num:2d}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_01_ode_oracles():
    t = time.perf_counter()
    errs = []
    for a in (1.0, 2.0):
        sol = solve_comparison(CurvatureProfile.constant(-a * a), 10.0)
        s = np.linspace(0, 10, 2001)
        errs.append(float(np.max(np.abs(sol.F_at(s) - np.sinh(a * s) / a)) / math.cosh(a * 10)))
    dt = time.perf_counter() - t
    record(1, max(errs) <= 1e-8 and dt < 1.0, f"sinh oracle rel err {max(errs):.2e} (<= 1e-8), {dt:.2f}s (< 1s)")


def test_criterion_02_comparison_properties():
    rng = np.random.default_rng(2024)
    t = time.perf_counter()
    worst = {"i": math.inf, "ii": -math.inf, "iii": -math.inf}
    ok = True
    for _ in range(20):
        n = int(rng.integers(3, 9))
        vals = np.minimum.accumulate(-np.sort(rng.uniform(0.5, 4.0, n)))
        grid = np.sort(np.concatenate([[0.0], rng.uniform(0.2, 6.0, n - 1)]))
        prof = CurvatureProfile.samples(grid, vals, a=math.sqrt(-vals[0]))
        sol = solve_comparison(prof, 8.0)
        k0 = CurvatureProfile.constant(-prof.a**2)
        sol0 = solve_comparison(k0, 8.0)
        r1, r2 = check_growth_ratios(sol, tol=1e-6), check_G_over_sF(sol, tol=1e-6)
        r3 = check_ratio_bound(sol, sol0, ratio_constant_C(prof, k0, 8.0), tol=1e-6)
        ok &= r1["passed"] and r2["passed"] and r3["passed"]
        worst["i"] = min(worst["i"], r1["min_sFprime_over_F"])
        worst["ii"] = max(worst["ii"], r2["max_violation"])
        worst["iii"] = max(worst["iii"], r3["max_log_ratio"] - r3["C"])
    dt = time.perf_counter() - t
    record(2, ok and dt < 10.0,
           f"20 profiles: min sF'/F {worst['i']:.6f}, max G/(sF) rise {worst['ii']:.1e}, "
           f"max |ln F/F0| - C {worst['iii']:.2f}, {dt:.1f}s (< 10s)")


def test_criterion_03_ball_model_oracle(hyperbolic):
    _, model, _ = hyperbolic
    r = np.linspace(0, 10, 2001)
    eg = float(np.max(np.abs(model.g(r) - np.tanh(r / 2))))
    tt = np.linspace(0, 0.999, 2001)
    ex = 2 / (1 - tt**2)
    ef = float(np.max(np.abs(model.fprime(tt) - ex) / ex))
    record(3, eg <= 1e-8 and ef <= 1e-6, f"|g - tanh(r/2)| {eg:.2e} (<= 1e-8), rel f' err {ef:.2e} (<= 1e-6)")


def test_criterion_04_plateau_oracle(equator_disc):
    res = equator_disc
    dev = float(np.max(np.abs(res.map.positions[:, 2])))
    rel = res.conformality_defect / res.energy
    ok = res.converged and dev <= 1e-3 and rel <= 1e-3 and res.seconds < 60
    record(4, ok, f"max |x3| {dev:.1e} (<= 1e-3), defect/E {rel:.2e} (<= 1e-3), "
                  f"solve {res.seconds:.1f}s (< 60s), E {res.energy:.4f}")


def test_criterion_05_monotonicity_equality(hyperbolic, equator_disc):
    rep = monotonicity_report(equator_disc.map, hyperbolic[0], np.linspace(0.5, 2.5, 9))
    ratios = np.array([row["ratio"] for row in rep["rows"]]) / (2 * math.pi)
    ok = len(ratios) == 9 and np.all((ratios >= 0.98) & (ratios <= 1.02))
    record(5, ok, f"ratio / 2pi in [{ratios.min():.5f}, {ratios.max():.5f}] (within [0.98, 1.02])")


def test_criterion_06_cone_equality(hyperbolic):
    _, model, _ = hyperbolic
    c = make_curve("equator")
    errs = [cone_area_check(c, model, R)["rel_err"] for R in (1.0, 2.0, 4.0)]
    record(6, max(errs) <= 1e-4, f"cone area vs L*G(R) rel err {max(errs):.1e} (<= 1e-4) at R = 1, 2, 4")


@pytest.mark.slow
def test_criterion_07_area_bound_ledger(steep):
    _, _, metric = steep
    ok = True
    parts = []
    for name in ("tilted-circle", "torus-knot-projection"):
        led = run_expansion(make_curve(name), [1, 2, 3, 4, 5, 6], metric, opts=ExpansionOptions(level=4))
        worst = max(row["area"] / row["bound"] for e in led.entries for row in e["area_table"])
        b = [e["area_b"] for e in led.entries if e["R"] >= 3]
        spread = (max(b) - min(b)) / min(b)
        conv = all(e["converged"] for e in led.entries)
        ten = all(e["ten"]["passed"] for e in led.entries)
        ok &= conv and worst <= 1.05 and spread <= 0.10 and ten
        parts.append(f"{name}: max area/bound {worst:.4f}, b-area spread {100 * spread:.1f}%")
    record(7, ok, "; ".join(parts) + " (<= 1.05, <= 10%)")


@pytest.fixture(scope="module")
def k1_tilted_ledger(hyperbolic):
    return run_expansion(make_curve("tilted-circle"), [1, 2, 3], hyperbolic[2], opts=ExpansionOptions(level=4))


def test_criterion_08_capacity(equator_disc, k1_tilted_ledger):
    bound = 8 * math.pi / math.log(2) * 1.05
    maps = [equator_disc.map] + [m for e, m in zip(k1_tilted_ledger.entries, k1_tilted_ledger.maps)
                                 if e["converged"]]
    energies = [capacity_check(m, a=1.0)["energy"] for m in maps]
    record(8, max(energies) <= bound,
           f"max E(u, D_1/2) {max(energies):.3f} over {len(maps)} solutions (<= {bound:.3f})")


def test_criterion_09_gradient_check(hyperbolic):
    _, model, metric = hyperbolic
    sheared = AmbientMetric(model, make_perturbation("rotation-shear", eps=0.3))
    mesh = build_mesh(1)
    rng = np.random.default_rng(9)
    t = time.perf_counter()
    worst = 0.0
    h = 1e-6
    for i in range(100):
        met = metric if i % 2 == 0 else sheared
        m = harmonic_extension(mesh, planar_circle(rng.uniform(0.1, 0.6), n=6), met)
        m = m.with_positions(m.positions + 0.05 * rng.standard_normal(m.positions.shape))
        _, g = energy_gradient(m)
        fd = np.zeros_like(g)
        for idx in np.ndindex(*g.shape):
            Xp, Xm = m.positions.copy(), m.positions.copy()
            Xp[idx] += h
            Xm[idx] -= h
            fd[idx] = (dirichlet_energy(m.with_positions(Xp)) - dirichlet_energy(m.with_positions(Xm))) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - g)) / np.max(np.abs(g))))
    dt = time.perf_counter() - t
    record(9, worst <= 1e-6 and dt < 30, f"max rel gradient err {worst:.1e} over 100 maps (<= 1e-6), {dt:.1f}s (< 30s)")


def test_criterion_10_blowup_pipeline():
    results = []
    for _ in range(2):
        m = concentration_fixture()
        ev = detect_concentration(m, window=0.25)
        _, lineage = run_blowup(m, k_index=8, threshold=0.9)
        results.append((ev, lineage))
    (ev, lineage), (_, again) = results
    first = lineage[0] if lineage else {}
    deterministic = json.dumps(lineage, sort_keys=True, default=float) == json.dumps(again, sort_keys=True,
                                                                                    default=float)
    ok = (ev is not None and bool(lineage) and first["coverage_after"] >= 0.5
          and first["energy_discarded"] > 0 and deterministic)
    record(10, ok, f"event at theta {ev['theta']:.4f}, coverage after {first.get('coverage_after', 0):.3f} "
                   f"(>= 0.5), discarded energy {first.get('energy_discarded', 0):.3e} (> 0), "
                   f"deterministic {deterministic}")


def test_criterion_11_determinism(tmp_path):
    args = ["expand", "--level", "3", "--schedule", "1,2,3", "--seed", "11", "--out", str(tmp_path)]
    codes = [cli_main(args + ["--run-name", name]) for name in ("a", "b")]
    a = (tmp_path / "expand-a" / "ledger.json").read_bytes()
    b = (tmp_path / "expand-b" / "ledger.json").read_bytes()
    record(11, codes == [0, 0] and a == b, f"two expand runs exit {codes}, ledger.json byte-identical {a == b}")
