"""Riemannian metrics on the unit ball of the form f'(|x|)^2 <u, v>_b.

``<, >_b`` is either Euclidean or a bounded perturbation B(x) supplied as a
vectorised callback.  The catalog perturbations act only tangentially to
the spheres |x| = const, so radial segments through 0 remain unit-speed
geodesics and f(|x|) is the distance to the centre.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ball_model import BallModel

__all__ = [
    "Perturbation",
    "PERTURBATIONS",
    "make_perturbation",
    "AmbientMetric",
    "SurfacePatch",
    "metric_tensor",
    "geodesic_radius",
    "patch_area",
    "jacobi_norm_check",
    "subdivide",
    "euclidean_areas",
]


@dataclass(frozen=True)
class Perturbation:
    """Symmetric positive B(x) with eigenvalues inside ``[m_lo, m_hi]``."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]  # (N, n) -> (N, n, n)
    m_lo: float
    m_hi: float
    params: tuple = ()

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.fn(np.atleast_2d(np.asarray(x, dtype=float)))

    def spot_check(self, dimension: int, samples: int = 256, seed: int = 0, tol: float = 1e-12) -> dict:
        """Eigenvalue bounds at quasi-random points of the ball."""
        rng = np.random.default_rng(seed)
        d = rng.normal(size=(samples, dimension))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts = d * rng.uniform(0, 1, size=(samples, 1)) ** (1.0 / dimension)
        Bs = self(pts)
        sym = float(np.max(np.abs(Bs - np.swapaxes(Bs, 1, 2))))
        ev = np.linalg.eigvalsh(0.5 * (Bs + np.swapaxes(Bs, 1, 2)))
        lo, hi = float(ev.min()), float(ev.max())
        return {"min_eig": lo, "max_eig": hi, "asymmetry": sym,
                "passed": lo >= self.m_lo - tol and hi <= self.m_hi + tol and sym <= tol}


def _tangential(x: np.ndarray, S: np.ndarray) -> np.ndarray:
    """P S P with P = |x|^2 I - x x^T (eigenvalues within |x|^4 times the spectrum of S)."""
    n = x.shape[1]
    r2 = np.einsum("ij,ij->i", x, x)
    P = r2[:, None, None] * np.eye(n)[None] - x[:, :, None] * x[:, None, :]
    return P @ S @ P


def _identity():
    def fn(x):
        return np.broadcast_to(np.eye(x.shape[1]), (x.shape[0], x.shape[1], x.shape[1])).copy()
    return fn


def _diagonal_bump(eps: float, width: float):
    def fn(x):
        n = x.shape[1]
        S = np.zeros((n, n))
        S[0, 0] = 1.0
        c = np.zeros(n)
        c[1] = 0.5
        w = np.exp(-np.sum((x - c) ** 2, axis=1) / width**2)
        return np.eye(n)[None] + eps * w[:, None, None] * _tangential(x, S)
    return fn


def _rotation_shear(eps: float):
    def fn(x):
        n = x.shape[1]
        S = np.zeros((n, n))
        S[0, 1] = S[1, 0] = 1.0
        return np.eye(n)[None] + eps * _tangential(x, S)
    return fn


def make_perturbation(name: str, eps: float = 0.2, width: float = 0.5) -> Perturbation:
    """Catalog perturbations.

    ``identity``       B = I,                                 bounds (1, 1)
    ``diagonal-bump``  B = I + eps*bump(x)*P e1 e1^T P,        bounds (1, 1+eps)
    ``rotation-shear`` B = I + eps*P (e1 e2^T + e2 e1^T) P,    bounds (1-eps, 1+eps)
    """
    if name == "identity":
        return Perturbation("identity", _identity(), 1.0, 1.0)
    if eps < 0:
        raise ValueError("perturbation eps must be >= 0")
    if name == "diagonal-bump":
        return Perturbation(name, _diagonal_bump(eps, width), 1.0, 1.0 + eps, (("eps", eps), ("width", width)))
    if name == "rotation-shear":
        if eps >= 1:
            raise ValueError("rotation-shear needs eps < 1 to stay positive definite")
        return Perturbation(name, _rotation_shear(eps), 1.0 - eps, 1.0 + eps, (("eps", eps),))
    raise ValueError(f"unknown perturbation {name!r}; catalog: {sorted(PERTURBATIONS)}")


PERTURBATIONS = {
    "identity": (1.0, 1.0),
    "diagonal-bump": ("1", "1+eps"),
    "rotation-shear": ("1-eps", "1+eps"),
}


@dataclass(frozen=True)
class AmbientMetric:
    """f'(|x|)^2 B(x) on the unit ball; ``model=None`` gives the flat metric."""

    model: BallModel | None
    perturbation: Perturbation | None = None
    dimension: int = 3
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.dimension < 3:
            raise ValueError("ambient dimension must be >= 3")
        if self.perturbation is not None:
            rep = self.perturbation.spot_check(self.dimension)
            if not rep["passed"]:
                raise ValueError(f"perturbation {self.perturbation.name!r} violates declared bounds: {rep}")

    @classmethod
    def flat(cls, dimension: int = 3) -> "AmbientMetric":
        return cls(model=None, perturbation=None, dimension=dimension)

    @property
    def is_flat(self) -> bool:
        return self.model is None

    @property
    def is_rotational(self) -> bool:
        return self.perturbation is None or self.perturbation.name == "identity"

    @property
    def b_bounds(self) -> tuple[float, float]:
        if self.perturbation is None:
            return (1.0, 1.0)
        return (self.perturbation.m_lo, self.perturbation.m_hi)

    @property
    def safe_radius(self) -> float:
        if self.model is None:
            return math.inf
        return min(1.0 - self.model.margin, self.model.t_max)

    def check_inside(self, x: np.ndarray) -> None:
        if self.model is None:
            return
        r = np.linalg.norm(np.atleast_2d(x), axis=-1)
        bad = np.flatnonzero(r >= self.safe_radius)
        if bad.size:
            raise ValueError(f"point {int(bad[0])} at |x| = {r[bad[0]]:.12g} outside the safe ball "
                             f"(|x| < {self.safe_radius:.12g})")

    # pointwise pieces ---------------------------------------------------
    def lam2(self, x: np.ndarray, with_grad: bool = False):
        """Conformal weight f'(|x|)^2 at points (N, n), optionally its x-gradient."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.model is None:
            w = np.ones(x.shape[0])
            return (w, np.zeros_like(x)) if with_grad else w
        self.check_inside(x)
        t = np.linalg.norm(x, axis=1)
        lam, dlam = self.model.factor_and_derivative(t)
        w = lam**2
        if not with_grad:
            return w
        safe = np.where(t > 0, t, 1.0)
        grad = (2 * lam * dlam / safe)[:, None] * x
        return w, grad

    def bmat(self, x: np.ndarray) -> np.ndarray | None:
        if self.perturbation is None:
            return None
        return self.perturbation(x)

    def bmat_grad(self, x: np.ndarray) -> np.ndarray | None:
        """Central differences dB/dx_k, shape (N, n, n, n) with k last."""
        if self.perturbation is None:
            return None
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h = self.fd_step
        out = np.empty((x.shape[0], x.shape[1], x.shape[1], x.shape[1]))
        for k in range(x.shape[1]):
            e = np.zeros(x.shape[1])
            e[k] = h
            out[..., k] = (self.perturbation(x + e) - self.perturbation(x - e)) / (2 * h)
        return out

    def tensor(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        w = self.lam2(x)
        B = self.bmat(x)
        if B is None:
            B = np.broadcast_to(np.eye(x.shape[1]), (x.shape[0], x.shape[1], x.shape[1]))
        return w[:, None, None] * B

    def geodesic_radius(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.linalg.norm(x, axis=1)
        if self.model is None:
            return t
        return self.model.f(t)

    def triangle_areas(self, tri: np.ndarray, b_only: bool = False) -> np.ndarray:
        """Areas of image triangles (T, 3, n) with the metric averaged over the corners."""
        T, _, n = tri.shape
        e1 = tri[:, 1] - tri[:, 0]
        e2 = tri[:, 2] - tri[:, 0]
        pts = tri.reshape(-1, n)
        B = self.bmat(pts)
        w = np.ones((T, 3)) if b_only else self.lam2(pts).reshape(T, 3)
        if B is None:
            lam2 = w.mean(axis=1)
            g11 = lam2 * np.einsum("ij,ij->i", e1, e1)
            g22 = lam2 * np.einsum("ij,ij->i", e2, e2)
            g12 = lam2 * np.einsum("ij,ij->i", e1, e2)
        else:
            M = np.einsum("tc,tcij->tij", w, B.reshape(T, 3, n, n)) / 3.0
            Me2 = np.einsum("tij,tj->ti", M, e2)
            g11 = np.einsum("ti,tij,tj->t", e1, M, e1)
            g22 = np.einsum("ti,ti->t", e2, Me2)
            g12 = np.einsum("ti,ti->t", e1, Me2)
        det = np.maximum(g11 * g22 - g12**2, 0.0)
        return 0.5 * np.sqrt(det)


def metric_tensor(metric: AmbientMetric, x) -> np.ndarray:
    """f'(|x|)^2 B(x) at a single point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != metric.dimension:
        raise ValueError("x must be a point of the ambient dimension")
    if metric.model is not None and np.linalg.norm(x) >= 1.0 - metric.model.margin:
        raise ValueError("point outside the ball (or within the boundary margin)")
    return metric.tensor(x[None])[0]


def geodesic_radius(metric: AmbientMetric, x) -> float:
    """Distance to the centre along the radial segment, f(|x|)."""
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) >= 1.0:
        raise ValueError("point outside the open unit ball")
    return float(metric.geodesic_radius(x[None])[0])


@dataclass
class SurfacePatch:
    """Image triangles (T, 3, n) in the ball."""

    triangles: np.ndarray
    provenance: str = ""


def subdivide(tri: np.ndarray, levels: int = 1) -> np.ndarray:
    """Midpoint subdivision (each triangle into 4), applied ``levels`` times."""
    for _ in range(levels):
        p0, p1, p2 = tri[:, 0], tri[:, 1], tri[:, 2]
        m01, m12, m20 = 0.5 * (p0 + p1), 0.5 * (p1 + p2), 0.5 * (p2 + p0)
        tri = np.concatenate([
            np.stack([p0, m01, m20], 1),
            np.stack([m01, p1, m12], 1),
            np.stack([m20, m12, p2], 1),
            np.stack([m01, m12, m20], 1),
        ])
    return tri


def patch_area(metric: AmbientMetric, patch: SurfacePatch, refine: int = 0,
               b_only: bool = False) -> float:
    """Sum of corner-averaged triangle areas; degenerate triangles are skipped.

    ``refine`` subdivides each (flat) triangle before applying the rule.
    ``b_only`` drops the conformal factor, giving the <,>_b area.
    """
    tri = np.asarray(patch.triangles, dtype=float)
    good = euclidean_areas(tri) > 1e-300
    skipped = int((~good).sum())
    if skipped:
        warnings.warn(f"patch_area skipped {skipped} degenerate triangles", RuntimeWarning, stacklevel=2)
    tri = subdivide(tri[good], refine)
    return float(np.sum(metric.triangle_areas(tri, b_only=b_only)))


def euclidean_areas(tri: np.ndarray) -> np.ndarray:
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    det = (np.einsum("ij,ij->i", e1, e1) * np.einsum("ij,ij->i", e2, e2)
           - np.einsum("ij,ij->i", e1, e2) ** 2)
    return 0.5 * np.sqrt(np.maximum(det, 0.0))


def _perpendicular(d: np.ndarray) -> np.ndarray:
    for j in np.argsort(np.abs(d)):
        e = np.zeros_like(d)
        e[j] = 1.0
        p = e - np.dot(e, d) * d
        if np.linalg.norm(p) > 1e-8:
            return p / np.linalg.norm(p)
    raise ValueError("cannot build a perpendicular direction")


def jacobi_norm_check(metric: AmbientMetric, direction, s: float, h: float = 1e-5,
                      perp=None) -> dict:
    """|dExp(s d) w| for unit w perpendicular to d, by central differences.

    The exponential map is realised as x = g(s) * direction.  For the
    rotationally symmetric metric the norm equals F(s) exactly; for a
    perturbation it lies between sqrt(m_lo) F(s) and sqrt(m_hi) F(s).
    """
    if metric.model is None:
        raise ValueError("jacobi check needs a ball model")
    if h < 1e-8:
        raise ValueError("h below the finite-difference precision floor (1e-8)")
    d = np.asarray(direction, dtype=float)
    if not math.isclose(float(np.linalg.norm(d)), 1.0, abs_tol=1e-12):
        raise ValueError("direction must be a unit vector")
    p = _perpendicular(d) if perp is None else np.asarray(perp, dtype=float)
    model = metric.model
    g = float(model.g(s))

    def pt(theta):
        return g * (math.cos(theta) * d + math.sin(theta) * p)

    v = (pt(h) - pt(-h)) / (2 * h)
    x = pt(0.0)
    G = metric.tensor(x[None])[0]
    numeric = math.sqrt(float(v @ G @ v))
    F = float(model.sol.F_at(s))
    lo, hi = metric.b_bounds
    return {
        "numeric": numeric,
        "analytic": F,
        "lower": math.sqrt(lo) * F,
        "upper": math.sqrt(hi) * F,
        "rel_err": abs(numeric - F) / F if F > 0 else 0.0,
        "s": s,
        "h": h,
    }
