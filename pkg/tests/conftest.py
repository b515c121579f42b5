import numpy as np
import pytest

from hadamard_plateau.ambient_metric import AmbientMetric
from hadamard_plateau.ball_model import build_ball_model
from hadamard_plateau.comparison_ode import CurvatureProfile, solve_comparison
from hadamard_plateau.disc_mesh import build_mesh
from hadamard_plateau.expansion import build_gamma_R, make_curve
from hadamard_plateau.plateau import BoundaryCurve, solve_plateau


@pytest.fixture(scope="session")
def hyperbolic():
    """Constant curvature -1: comparison solution, ball model and metric."""
    sol = solve_comparison(CurvatureProfile.constant(-1.0), 24.0)
    model = build_ball_model(sol)
    return sol, model, AmbientMetric(model)


@pytest.fixture(scope="session")
def steep():
    """Constant curvature -2.25 (a = 1.5)."""
    sol = solve_comparison(CurvatureProfile.constant(-2.25), 24.0)
    model = build_ball_model(sol)
    return sol, model, AmbientMetric(model)


@pytest.fixture(scope="session")
def equator_disc(hyperbolic):
    """Equatorial disc at R = 3 on a level-5 mesh."""
    sol, model, metric = hyperbolic
    gamma = build_gamma_R(make_curve("equator"), model, 3.0)
    return solve_plateau(gamma, build_mesh(5), metric)


def planar_circle(radius=1.0, n=512, dimension=3):
    th = 2 * np.pi * np.arange(n) / n
    out = np.zeros((n, dimension))
    out[:, 0], out[:, 1] = radius * np.cos(th), radius * np.sin(th)
    return BoundaryCurve(out)


_K1 = {}


def _metric_k1():
    """Cached k = -1 metric for hypothesis tests (fixtures are not reset between examples)."""
    if "m" not in _K1:
        sol = solve_comparison(CurvatureProfile.constant(-1.0), 24.0)
        _K1["m"] = AmbientMetric(build_ball_model(sol))
    return _K1["m"]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
