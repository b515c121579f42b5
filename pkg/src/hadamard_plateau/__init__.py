"""Complete minimal discs with prescribed asymptotic boundary in Hadamard models.

Modules:

* ``comparison_ode``: the radial comparison problem F'' + kF = 0 and its checks.
* ``ball_model``: conformal unit-ball coordinates built from F.
* ``ambient_metric``: the ball metric, optionally with a bounded tangential perturbation.
* ``disc_mesh``: polar meshes of the parameter disc, Courant-Lebesgue search, lune maps.
* ``plateau``: discrete Dirichlet-energy minimisation for a boundary curve.
* ``expansion``: the expanding-curve scheme, concentration detection and blow-up.
* ``verification``: monotonicity, Hessian, boundary-at-infinity checks and manifests.
* ``config`` / ``cli``: run configuration and the command line tool.
"""
from .ambient_metric import AmbientMetric, make_perturbation
from .ball_model import BallModel, build_ball_model
from .comparison_ode import CurvatureProfile, solve_comparison
from .disc_mesh import DiscMesh, build_mesh
from .expansion import ExpansionOptions, make_curve, run_expansion
from .plateau import BoundaryCurve, DiscMap, PlateauOptions, solve_plateau

__version__ = "0.1.0"

__all__ = [
    "AmbientMetric",
    "BallModel",
    "BoundaryCurve",
    "CurvatureProfile",
    "DiscMap",
    "DiscMesh",
    "ExpansionOptions",
    "PlateauOptions",
    "build_ball_model",
    "build_mesh",
    "make_curve",
    "make_perturbation",
    "run_expansion",
    "solve_comparison",
    "solve_plateau",
]
