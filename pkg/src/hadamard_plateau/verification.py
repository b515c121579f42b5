"""Cross-cutting numerical checks and the pass/fail manifest."""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.integrate import solve_ivp

from .ambient_metric import AmbientMetric, euclidean_areas
from .comparison_ode import ComparisonSolution
from .disc_mesh import _SUB, clip_triangles

__all__ = [
    "clipped_area",
    "polar_clipped_area",
    "monotonicity_report",
    "hessian_spot_check",
    "asymptotic_boundary_check",
    "hausdorff",
    "run_manifest",
    "MANIFEST_KEYS",
]

MANIFEST_KEYS = ("Fsao-i", "Fsao-ii", "Fsao-iii", "BR", "BM", "mon", "c0-i", "c0-ii", "a", "ten", "are",
                 "des8-empirical")


def _piece_areas(metric: AmbientMetric | None, pieces: np.ndarray, b_only: bool) -> np.ndarray:
    if metric is None or metric.is_flat:
        return euclidean_areas(pieces)
    return metric.triangle_areas(pieces, b_only=b_only)


def clipped_area(tri: np.ndarray, metric: AmbientMetric | None, radius: float, tol: float = 1e-6,
                 max_depth: int = 8, b_only: bool = False) -> dict:
    """Area of the image triangles inside the Euclidean ball |x| <= radius.

    The subdivision depth grows until two successive estimates agree to
    ``tol`` (relative) or ``max_depth`` is reached.
    """
    tri = np.asarray(tri, dtype=float)
    c = np.zeros(tri.shape[2])
    prev = None
    est = 0.0
    depth = 0
    for depth in range(max_depth + 1):
        parent, bary = clip_triangles(tri, c, radius, depth=depth)
        pieces = np.einsum("kvj,kjd->kvd", bary, tri[parent])
        est = float(np.sum(_piece_areas(metric, pieces, b_only))) if len(pieces) else 0.0
        if prev is not None and abs(est - prev) <= tol * max(abs(est), 1e-300):
            break
        prev = est
    return {"area": est, "depth": depth, "converged": prev is not None and abs(est - prev) <= tol * max(abs(est), 1e-300)}


def _clip_linear(vals: np.ndarray, level: float):
    """Barycentric pieces of each triangle where the linear interpolant of ``vals`` is <= level."""
    parents, pieces = [], []
    eye = np.eye(3)
    for t, v in enumerate(vals):
        if v.max() <= level:
            parents.append(t)
            pieces.append(eye)
            continue
        if v.min() > level:
            continue
        poly = []
        for i in range(3):
            j = (i + 1) % 3
            if v[i] <= level:
                poly.append(eye[i])
            if (v[i] <= level) != (v[j] <= level):
                w = (level - v[i]) / (v[j] - v[i])
                poly.append((1 - w) * eye[i] + w * eye[j])
        for k in range(1, len(poly) - 1):
            parents.append(t)
            pieces.append(np.stack([poly[0], poly[k], poly[k + 1]]))
    if not parents:
        return np.zeros(0, int), np.zeros((0, 3, 3))
    return np.asarray(parents), np.asarray(pieces)


def _subdivide_bary(bary: np.ndarray, depth: int) -> tuple[np.ndarray, np.ndarray]:
    owner = np.arange(len(bary))
    for _ in range(depth):
        bary = np.einsum("svw,kwj->ksvj", _SUB, bary).reshape(-1, 3, 3)
        owner = np.repeat(owner, 4)
    return owner, bary


def polar_clipped_area(tri: np.ndarray, metric: AmbientMetric, s: float, tol: float = 1e-4,
                       max_depth: int = 4, b_only: bool = False, chunk: int = 200_000) -> dict:
    """Area inside the geodesic ball B_s about the origin, on the polar reconstruction.

    Inside each image triangle the geodesic radius is interpolated linearly
    from the corners and the direction follows the linear interpolant, so
    points between vertices at radius r stay at radius r.  Membership in
    B_s is then a linear clip; the curved pieces are subdivided until the
    area changes by less than ``tol`` (relative) or ``max_depth`` is reached.
    Flat Euclidean chords, by contrast, sag toward the origin by about
    chord^2 / 8, which near the ideal boundary exceeds 1 - g(s).
    """
    tri = np.asarray(tri, dtype=float)
    T, _, n = tri.shape
    rad = metric.geodesic_radius(tri.reshape(-1, n)).reshape(T, 3)
    parent, pieces = _clip_linear(rad, s)
    if parent.size == 0:
        return {"area": 0.0, "depth": 0, "converged": True}
    model = metric.model

    def area_at(depth):
        owner, sub = _subdivide_bary(pieces, depth)
        total = 0.0
        for lo in range(0, len(sub), chunk):
            b = sub[lo:lo + chunk]
            p = parent[owner[lo:lo + chunk]]
            lin = np.einsum("kvj,kjd->kvd", b, tri[p])
            r = np.einsum("kvj,kj->kv", b, rad[p])
            nrm = np.linalg.norm(lin, axis=2)
            scale = model.g(r) if model is not None else r
            safe = nrm > 1e-12
            fac = np.where(safe, scale / np.where(safe, nrm, 1.0), 1.0)
            pts = lin * fac[..., None]
            total += float(np.sum(_piece_areas(metric, pts, b_only)))
        return total

    prev = area_at(0)
    depth = 0
    converged = False
    for depth in range(1, max_depth + 1):
        est = area_at(depth)
        converged = abs(est - prev) <= tol * max(abs(est), 1e-300)
        prev = est
        if converged:
            break
    return {"area": prev, "depth": depth, "converged": converged}


def monotonicity_report(disc_map, sol: ComparisonSolution, radii, ratio_tol: float | None = None,
                        clip_tol: float = 1e-4) -> dict:
    """Area(M ∩ B_r) / G(r) for geodesic balls about the origin (polar reconstruction).

    Radii whose ball contains part of the surface boundary are dropped with
    a warning.  ``ratio_tol`` defaults to 1e-2 * (5 / level) clamped to
    [1e-2, 5e-2].
    """
    metric = disc_map.metric
    level = disc_map.mesh.level
    if ratio_tol is None:
        ratio_tol = min(5e-2, max(1e-2, 1e-2 * 5.0 / max(level, 1)))
    bpos = disc_map.positions[disc_map.mesh.boundary_loop]
    r_bdy = float(np.min(metric.geodesic_radius(bpos)))
    tri = disc_map.image_triangles()
    rows = []
    dropped = []
    for r in np.asarray(radii, dtype=float):
        if r >= r_bdy:
            dropped.append(float(r))
            warnings.warn(f"radius {r:g} reaches the surface boundary (at {r_bdy:.4g}); dropped", RuntimeWarning)
            continue
        ca = polar_clipped_area(tri, metric, float(r), tol=clip_tol)
        G = float(sol.G_at(r))
        rows.append({"r": float(r), "area": ca["area"], "G": G, "ratio": ca["area"] / G, "depth": ca["depth"]})
    ratios = np.array([row["ratio"] for row in rows])
    if ratios.size > 1:
        worst = float(np.max((ratios[:-1] - ratios[1:]) / ratios[:-1]))
    else:
        worst = 0.0
    return {"rows": rows, "dropped": dropped, "ratio_tol": ratio_tol, "max_relative_decrease": worst,
            "level": level, "passed": worst <= ratio_tol}


def _geodesic_rhs(sol: ComparisonSolution):
    # polar model dr^2 + F(r)^2 dtheta^2 on a 2-plane through the origin
    def rhs(_, y):
        r, th, dr, dth = y
        F = float(sol.F_at(r))
        Fp = float(sol.Fprime_at(r))
        return [dr, dth, F * Fp * dth**2, -2.0 * Fp / F * dr * dth]
    return rhs


def hessian_spot_check(metric: AmbientMetric, sol: ComparisonSolution, x, u, h: float = 1e-3,
                       tol: float = 1e-6) -> dict:
    """Second derivative of r and G∘r along the geodesic through x with velocity u.

    The geodesic stays in the plane spanned by x and u, where the metric is
    dr^2 + F(r)^2 dtheta^2; it is integrated in polar form for parameters
    -h, 0, h and differentiated by central differences.  Compares
    Hess r(u, u) with (F'/F)|u_perp|^2 and Hess G∘r(u, u) with F'|u|^2.
    """
    if metric.model is None or not metric.is_rotational:
        raise ValueError("Hessian spot check needs a rotationally symmetric model metric")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    t = float(np.linalg.norm(x))
    if t < 1e-12:
        raise ValueError("distance function is not smooth at the origin")
    model = metric.model
    r0 = float(model.f(t))
    xhat = x / t
    lam = float(model.fprime(t))
    # Euclidean velocity u -> polar components (metric-length |u|_g = lam |u|)
    u_rad = float(u @ xhat)
    u_perp_vec = u - u_rad * xhat
    u_perp = float(np.linalg.norm(u_perp_vec))
    dr0 = lam * u_rad
    F0 = float(sol.F_at(r0))
    dth0 = lam * u_perp / F0
    speed2 = dr0**2 + (F0 * dth0) ** 2
    rhs = _geodesic_rhs(sol)

    def r_at(s):
        if s == 0:
            return r0
        res = solve_ivp(rhs, (0.0, s), [r0, 0.0, dr0, dth0], method="DOP853", rtol=1e-12, atol=1e-14)
        return float(res.y[0, -1])

    def second(fn, step):
        return (fn(step) - 2 * fn(0.0) + fn(-step)) / step**2

    def G_at(s):
        return float(sol.G_at(r_at(s)))

    # Richardson extrapolation of the central difference (error O(h^4))
    hess_r = (4 * second(r_at, h / 2) - second(r_at, h)) / 3
    hess_G = (4 * second(G_at, h / 2) - second(G_at, h)) / 3
    Fp = float(sol.Fprime_at(r0))
    bound_r = Fp / F0 * (F0 * dth0) ** 2  # only the spherical part of u contributes
    bound_G = Fp * speed2
    scale = max(1.0, speed2)
    return {
        "r": r0,
        "hess_r": hess_r,
        "bound_r": bound_r,
        "hess_G": hess_G,
        "bound_G": bound_G,
        "speed2": speed2,
        "tol": tol,
        "hes1_pass": hess_r >= bound_r - tol * scale,
        "hes2_pass": hess_G >= bound_G - tol * scale,
        "hes1_rel_gap": (hess_r - bound_r) / scale,
        "hes2_rel_gap": (hess_G - bound_G) / scale,
    }


def hausdorff(A: np.ndarray, B: np.ndarray) -> tuple[float, float, float]:
    """(sup_a d(a,B), sup_b d(b,A), symmetric) for finite point sets."""
    from scipy.spatial import cKDTree
    dA, _ = cKDTree(B).query(A)
    dB, _ = cKDTree(A).query(B)
    return float(dA.max()), float(dB.max()), float(max(dA.max(), dB.max()))


def asymptotic_boundary_check(ledger, curve, trend_tol: float = 1e-9) -> dict:
    """Distance between radially projected boundary images and the sphere curve.

    Entries flagged with concentration or a point-boundary outcome are
    excluded.  The trend passes when the symmetric distance is
    non-increasing over the last three entries (within ``trend_tol``) or
    already at sample resolution.
    """
    gam = np.asarray(curve.samples)
    sample_gap = float(np.max(np.linalg.norm(np.roll(gam, -1, 0) - gam, axis=1)))
    rows, excluded = [], []
    for e in ledger.entries:
        if e.get("concentration") or e.get("outcome") == "point-boundary":
            excluded.append(e["R"])
            continue
        X = np.asarray(e["boundary_images"], dtype=float)
        P = X / np.linalg.norm(X, axis=1, keepdims=True)
        d1, d2, ds = hausdorff(P, gam)
        # half the widest gap between projected vertices plus the sample spacing
        floor = 0.5 * float(np.max(np.linalg.norm(np.roll(P, -1, 0) - P, axis=1))) + sample_gap
        rows.append({"R": e["R"], "proj_to_curve": d1, "curve_to_proj": d2, "hausdorff": ds,
                     "resolution": floor})
    tail = rows[-3:]
    hs = [row["hausdorff"] for row in tail]
    trend = all(b <= a + trend_tol for a, b in zip(hs[:-1], hs[1:]))
    passed = bool(rows) and (trend or tail[-1]["hausdorff"] <= tail[-1]["resolution"])
    return {"rows": rows, "excluded": excluded, "trend_non_increasing": trend, "passed": passed}


def run_manifest(reports: dict) -> dict:
    """Aggregate reports keyed by check tag into a deterministic manifest.

    Each report must carry ``passed``; ``tol`` (or ``tolerances``) is copied
    through when present.  Unknown tags are kept and sorted after the
    standard ones.
    """
    if not reports:
        return {"entries": {}, "all_passed": True, "count": 0}
    order = [k for k in MANIFEST_KEYS if k in reports] + sorted(k for k in reports if k not in MANIFEST_KEYS)
    entries = {}
    for k in order:
        rep = reports[k]
        item = {"passed": bool(rep.get("passed", False))}
        for key in ("tol", "tolerances", "level", "detail"):
            if key in rep:
                item[key] = rep[key]
        entries[k] = item
    return {"entries": entries, "all_passed": all(v["passed"] for v in entries.values()), "count": len(entries)}
