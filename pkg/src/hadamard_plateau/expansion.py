"""Expanding-disc scheme: solve on Γ_R = g(R)·γ along a radius schedule.

Each schedule entry is warm-started from the previous one, recentred, and
checked against the cone area bound, the b-metric area bound and the
hitting radius.  Boundary energy concentration is detected from the
boundary parametrisation and resolved by lune blow-up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad

from .ambient_metric import AmbientMetric
from .ball_model import BallModel
from .disc_mesh import DiscMesh, build_mesh, courant_lebesgue_radius, lune_to_disc
from .plateau import (BoundaryCurve, DiscMap, PlateauOptions, dirichlet_energy, recenter, resample_map,
                      solve_plateau, subdisc_energy, surface_area, capacity_check)
from .verification import clipped_area, polar_clipped_area

__all__ = [
    "AsymptoticCurve",
    "BUILTIN_CURVES",
    "make_curve",
    "build_gamma_R",
    "collar_gap",
    "ExpansionOptions",
    "ExpansionLedger",
    "run_expansion",
    "solve_multilevel",
    "cone_area_check",
    "detect_concentration",
    "boundary_coverage",
    "blowup_rescale",
    "run_blowup",
    "concentration_fixture",
    "notched_circle",
    "modified_curve_threshold",
]


# --------------------------------------------------------------------------
# curves on the sphere at infinity
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class AsymptoticCurve:
    """Closed curve on the unit sphere, sampled at equal arclength."""

    samples: np.ndarray  # (N, n), rows of unit length
    name: str = "samples"

    def __post_init__(self):
        P = np.asarray(self.samples, dtype=float)
        nrm = np.linalg.norm(P, axis=1)
        if np.any(np.abs(nrm - 1.0) > 1e-12):
            raise ValueError("asymptotic curve samples must lie on the unit sphere")
        object.__setattr__(self, "samples", P)

    @classmethod
    def from_function(cls, fn, n: int = 4096, name: str = "function", oversample: int = 8) -> "AsymptoticCurve":
        """Sample ``fn(theta)`` (theta in [0, 2 pi)), project to the sphere, equalise arclength."""
        th = 2 * np.pi * np.arange(n * oversample) / (n * oversample)
        P = np.asarray(fn(th), dtype=float)
        P /= np.linalg.norm(P, axis=1, keepdims=True)
        arcs = _arc_angles(P)
        s = np.concatenate([[0.0], np.cumsum(arcs)])
        target = s[-1] * np.arange(n) / n
        Pc = np.concatenate([P, P[:1]])
        j = np.clip(np.searchsorted(s, target, side="right") - 1, 0, len(P) - 1)
        w = (target - s[j]) / arcs[j]
        # spherical linear interpolation inside each fine arc
        a, b = Pc[j], Pc[j + 1]
        omega = arcs[j]
        so = np.sin(omega)
        Q = (np.sin((1 - w) * omega) / so)[:, None] * a + (np.sin(w * omega) / so)[:, None] * b
        Q /= np.linalg.norm(Q, axis=1, keepdims=True)
        return cls(samples=Q, name=name)

    @property
    def L(self) -> float:
        """Sphere arclength."""
        return float(np.sum(_arc_angles(self.samples)))

    @property
    def chord_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.roll(self.samples, -1, 0) - self.samples, axis=1)))

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    def tangents(self) -> np.ndarray:
        """Unit-speed tangents by periodic central differences."""
        P = self.samples
        ds = self.L / len(P)
        return (np.roll(P, -1, 0) - np.roll(P, 1, 0)) / (2 * ds)

    def is_simple(self) -> bool:
        return BoundaryCurve(self.samples).is_simple()

    def rotated(self, Q: np.ndarray) -> "AsymptoticCurve":
        return AsymptoticCurve(samples=self.samples @ np.asarray(Q).T, name=self.name)


def _arc_angles(P: np.ndarray) -> np.ndarray:
    nxt = np.roll(P, -1, axis=0)
    cross = np.linalg.norm(P[:, :, None] * nxt[:, None, :] - nxt[:, :, None] * P[:, None, :], axis=(1, 2))
    return np.arctan2(cross / math.sqrt(2.0), np.einsum("ij,ij->i", P, nxt))


def _equator(th, dim=3):
    out = np.zeros((len(th), dim))
    out[:, 0], out[:, 1] = np.cos(th), np.sin(th)
    return out


def _tilted_circle(th, dim=3, radius=1.2, tilt=0.4):
    # small circle of angular radius ``radius`` about an axis tilted by ``tilt`` from e3
    axis = np.array([math.sin(tilt), 0.0, math.cos(tilt)])
    e1 = np.array([math.cos(tilt), 0.0, -math.sin(tilt)])
    e2 = np.array([0.0, 1.0, 0.0])
    P = (math.cos(radius) * axis[None] + math.sin(radius) * (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2))
    out = np.zeros((len(th), dim))
    out[:, :3] = P
    return out


def _torus_knot_projection(th, dim=3, q=3, minor=0.3):
    # (1, q) torus curve projected radially; p = 1 keeps it simple
    rad = 1.0 + minor * np.cos(q * th)
    out = np.zeros((len(th), dim))
    out[:, 0] = rad * np.cos(th)
    out[:, 1] = rad * np.sin(th)
    out[:, 2] = minor * np.sin(q * th)
    return out


BUILTIN_CURVES = {
    "equator": _equator,
    "tilted-circle": _tilted_circle,
    "torus-knot-projection": _torus_knot_projection,
}


def make_curve(name: str, n: int = 4096, dimension: int = 3, **params) -> AsymptoticCurve:
    if name not in BUILTIN_CURVES:
        raise ValueError(f"unknown curve {name!r}; built-ins: {sorted(BUILTIN_CURVES)}")
    fn = BUILTIN_CURVES[name]
    if name == "equator":
        th = 2 * np.pi * np.arange(n) / n
        return AsymptoticCurve(samples=fn(th, dimension), name=name)
    return AsymptoticCurve.from_function(lambda th: fn(th, dimension, **params), n=n, name=name)


def build_gamma_R(curve: AsymptoticCurve, model: BallModel | None, R: float) -> BoundaryCurve:
    """Polyline g(R)·γ; the flat metric (model None) uses radius R directly."""
    if R <= 0:
        raise ValueError("R must be positive")
    scale = float(model.g(R)) if model is not None else float(R)
    return BoundaryCurve(curve.samples * scale)


# --------------------------------------------------------------------------
# cone comparison
# --------------------------------------------------------------------------
def cone_area_check(curve: AsymptoticCurve, model: BallModel, R: float,
                    metric: AmbientMetric | None = None, tol: float = 1e-10) -> dict:
    """Area of the geodesic cone over γ out to radius R, against L·G(R).

    The cone point at (t, s) is g(t)γ(s); its area element is
    λ² g g' sqrt(det Gram_B(γ, γ')) with λ = f'(g(t)).  The s-integral uses
    the periodic trapezoid rule on the curve samples, the t-integral
    adaptive quadrature.
    """
    if R < 0:
        raise ValueError("R must be >= 0")
    gam = curve.samples
    tan = curve.tangents()
    ds = curve.L / len(gam)
    L = curve.L
    sol = model.sol
    G_R = float(sol.G_at(R)) if R > 0 else 0.0
    if R == 0:
        return {"cone_area": 0.0, "bound": 0.0, "L": L, "rel_err": 0.0, "m_lo": 1.0, "m_hi": 1.0}

    def b_factor(t):
        if metric is None or metric.perturbation is None:
            return L
        x = float(model.g(t)) * gam
        B = metric.bmat(x)
        g11 = np.einsum("ni,nij,nj->n", gam, B, gam)
        g22 = np.einsum("ni,nij,nj->n", tan, B, tan)
        g12 = np.einsum("ni,nij,nj->n", gam, B, tan)
        return float(np.sum(np.sqrt(np.maximum(g11 * g22 - g12**2, 0.0))) * ds)

    def integrand(t):
        if t <= 0:
            return 0.0
        # λ g' = 1 (unit radial speed) and λ g = F(t)
        return float(sol.F_at(t)) * b_factor(t)

    area, _ = quad(integrand, 0.0, R, epsabs=0.0, epsrel=tol, limit=200)
    bound = L * G_R
    m_lo, m_hi = (1.0, 1.0) if metric is None else metric.b_bounds
    return {"cone_area": area, "bound": bound, "L": L, "G": G_R, "rel_err": abs(area - bound) / bound,
            "m_lo": m_lo, "m_hi": m_hi,
            "sandwich_pass": m_lo * bound * (1 - 1e-9) <= area <= m_hi * bound * (1 + 1e-9)}


# --------------------------------------------------------------------------
# solving along the schedule
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ExpansionOptions:
    level: int = 5
    coarse_level: int = 2
    plateau: PlateauOptions = PlateauOptions()
    s_fractions: tuple[float, ...] = (0.25, 0.5, 0.625, 0.75, 0.875, 1.0)
    rho: float = 1.0  # configured radius for the b-area bound
    area_tol: float = 0.05
    recenter: bool = True
    window: float = 0.25
    threshold: float = 0.9
    clip_tol: float = 1e-3
    linear_area_diagnostic: bool = False
    # graded boundary rings sized by the gap between g(R) and the ideal sphere
    collar: bool = True
    collar_ratio: float = 1.25


def collar_gap(model: BallModel, R: float) -> float:
    """Domain distance from the unit circle to the metric blow-up for the scaled disc."""
    gR = float(model.g(R))
    return (1.0 - gR) / gR


@dataclass
class ExpansionLedger:
    schedule: list[float]
    entries: list[dict] = field(default_factory=list)
    E0: float = 0.0
    rho: float = 0.0
    blowup_lineage: list[dict] = field(default_factory=list)
    curve_name: str = ""
    level: int = 0
    maps: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"schedule": list(self.schedule), "entries": self.entries, "E0": self.E0, "rho": self.rho,
                "blowup_lineage": self.blowup_lineage, "curve": self.curve_name, "level": self.level}

    def to_json(self, path) -> None:
        from .io import write_json
        write_json(path, self.to_dict())

    def to_csv(self, path) -> None:
        from .io import write_csv
        rows = []
        for e in self.entries:
            for row in e["area_table"]:
                rows.append([e["R"], e["energy"], e["area"], e["defect"], row["s"], row["area"], row["bound"],
                             row["ratio"]])
        write_csv(path, ["R", "energy", "area", "defect", "s", "area_s", "bound_s", "ratio_s"], rows)


def solve_multilevel(curve: BoundaryCurve, level: int, metric: AmbientMetric, opts: PlateauOptions,
                     coarse_level: int = 2, init: DiscMap | None = None, collar_gap: float | None = None,
                     collar_ratio: float = 1.25):
    """Solve on levels coarse..level, each initialised from the previous."""
    prior = init
    res = None
    for lev in range(min(coarse_level, level), level + 1):
        mesh = build_mesh(lev, collar_gap, collar_ratio)
        res = solve_plateau(curve, mesh, metric, init=prior if prior is not None else "harmonic-extension",
                            opts=opts)
        prior = res.map
    return res


def _area_table(m: DiscMap, model: BallModel, L: float, R: float, fractions, C: float, tol: float,
                clip_tol: float, linear: bool = False) -> list[dict]:
    tri = m.image_triangles()
    rows = []
    for fr in fractions:
        s = R * fr
        ca = polar_clipped_area(tri, m.metric, s, tol=clip_tol)
        G = float(model.sol.G_at(s))
        bound = C * L * G
        row = {"s": s, "area": ca["area"], "G": G, "bound": bound, "ratio": ca["area"] / G,
               "passed": ca["area"] <= bound * (1 + tol)}
        if linear:
            # flat Euclidean chords, kept as a diagnostic of the sag near the ideal boundary
            row["area_linear"] = clipped_area(tri, m.metric, float(model.g(s)), tol=clip_tol)["area"]
        rows.append(row)
    return rows


def run_expansion(curve: AsymptoticCurve, schedule, metric: AmbientMetric, mesh: DiscMesh | None = None,
                  opts: ExpansionOptions | None = None) -> ExpansionLedger:
    """Solve the Plateau problem for Γ_R along an increasing schedule."""
    opts = opts or ExpansionOptions()
    schedule = [float(r) for r in schedule]
    if any(b <= a for a, b in zip(schedule[:-1], schedule[1:])):
        raise ValueError("schedule must be strictly increasing")
    model = metric.model
    if model is None:
        raise ValueError("expansion needs a ball-model metric")
    fixed_mesh = mesh
    level = mesh.level if mesh is not None else opts.level
    L = curve.L
    C = metric.b_bounds[1]
    a = model.a
    ledger = ExpansionLedger(schedule=schedule, curve_name=curve.name, level=level)
    prev: DiscMap | None = None
    rho_hat = 0.0
    for R in schedule:
        gamma_R = build_gamma_R(curve, model, R)
        gap = collar_gap(model, R) if opts.collar and fixed_mesh is None else None
        mesh = fixed_mesh if fixed_mesh is not None else build_mesh(level, gap, opts.collar_ratio)
        if prev is None:
            res = solve_multilevel(gamma_R, level, metric, opts.plateau, opts.coarse_level, collar_gap=gap,
                                   collar_ratio=opts.collar_ratio)
        else:
            scale = float(model.g(R)) / float(np.linalg.norm(prev.curve.samples, axis=1).max())
            init = resample_map(prev, mesh=mesh, curve=gamma_R, scale=scale)
            res = solve_plateau(gamma_R, mesh, metric, init=init, opts=opts.plateau)
        m = res.map
        event = detect_concentration(m, opts.window, opts.threshold)
        recentered = False
        if opts.recenter and event is None:
            try:
                m_rc, info = recenter(m)
                recentered = bool(info["moved"])
            except ValueError:
                m_rc = m
        else:
            m_rc = m
        E_eu = dirichlet_energy(m, euclidean=True)
        ledger.E0 = max(ledger.E0, E_eu)
        area_b = surface_area(m, b_only=True)
        table = _area_table(m, model, L, R, opts.s_fractions, C, opts.area_tol, opts.clip_tol,
                            opts.linear_area_diagnostic)
        # b-area bound: inner part plus 2 C L c^-1 g(rho)/F(rho), c = inf F'/F >= a
        rho = min(opts.rho, R)
        inner_b = polar_clipped_area(m.image_triangles(), metric, rho, tol=opts.clip_tol, b_only=True)["area"]
        ten_bound = inner_b + 2 * C * L / a * float(model.g(rho)) / float(model.sol.F_at(rho))
        radii = metric.geodesic_radius(m.positions)
        hit = float(np.min(radii))
        rho_hat = max(rho_hat, hit)
        outcome = "regular"
        if event is not None:
            outcome = "concentration"
        cap = capacity_check(m, a) if a > 0 else None
        entry = {
            "R": R,
            "energy": res.energy,
            "euclidean_energy": E_eu,
            "area": res.area,
            "area_b": area_b,
            "defect": res.conformality_defect,
            "iterations": res.iterations,
            "converged": res.converged,
            "flags": list(res.flags),
            "grad_norm": res.grad_norm,
            "recentered": recentered,
            "concentration": event,
            "outcome": outcome,
            "area_table": table,
            "area_bound_pass": all(row["passed"] for row in table),
            "ten": {"area_b": area_b, "bound": ten_bound, "inner_b": inner_b, "rho": rho,
                    "passed": area_b <= ten_bound},
            "hit_radius": hit,
            "capacity": cap,
            "boundary_images": m.positions[m.mesh.boundary_loop],
            "collar_rings": len(m.mesh.collar),
        }
        ledger.entries.append(entry)
        ledger.maps.append(m)
        prev = m_rc
    ledger.rho = rho_hat
    return ledger


# --------------------------------------------------------------------------
# concentration and blow-up
# --------------------------------------------------------------------------
def _boundary_angles(mesh: DiscMesh) -> np.ndarray:
    z = mesh.vertices[mesh.boundary_loop]
    return np.mod(np.arctan2(z[:, 1], z[:, 0]), 2 * np.pi)


def _param_of_angle(m: DiscMap):
    """Periodic piecewise-linear φ(θ) through the boundary vertices (unwrapped)."""
    th = _boundary_angles(m.mesh)
    t = m.boundary_params
    order = np.argsort(th)
    th, t = th[order], t[order]
    t = t[0] + np.mod(t - t[0], m.curve.L)
    L = m.curve.L

    def phi(x):
        x = np.asarray(x, dtype=float)
        k = np.floor((x - th[0]) / (2 * np.pi))
        xr = x - 2 * np.pi * k
        thx = np.concatenate([th, [th[0] + 2 * np.pi]])
        tx = np.concatenate([t, [t[0] + L]])
        return np.interp(xr, thx, tx) + L * k

    return phi


def detect_concentration(m: DiscMap, window: float = 0.25, threshold: float = 0.9,
                         samples: int | None = None) -> dict | None:
    """Largest curve-parameter increase over an angular window of the disc boundary."""
    if not 0 < window < 2 * np.pi:
        raise ValueError("window must lie in (0, 2 pi)")
    phi = _param_of_angle(m)
    n = samples or 8 * len(m.mesh.boundary_loop)
    centers = 2 * np.pi * np.arange(n) / n
    inc = phi(centers + window / 2) - phi(centers - window / 2)
    frac = inc / m.curve.L
    i = int(np.argmax(frac))
    if frac[i] <= threshold:
        return None
    return {"theta": float(centers[i]), "covered_fraction": float(frac[i]), "window": window,
            "threshold": threshold}


def boundary_coverage(m: DiscMap, mass: float = 0.9, samples: int = 4096) -> float:
    """Fraction of the circle in the shortest arc carrying ``mass`` of the curve parameter."""
    phi = _param_of_angle(m)
    L = m.curve.L
    th = 2 * np.pi * np.arange(samples) / samples
    widths = 2 * np.pi * np.arange(1, samples + 1) / samples
    lo, hi = 0, samples - 1
    # smallest width w such that some window of width w carries >= mass*L
    while lo < hi:
        mid = (lo + hi) // 2
        if np.max(phi(th + widths[mid]) - phi(th)) >= mass * L:
            hi = mid
        else:
            lo = mid + 1
    return float(widths[lo] / (2 * np.pi))


def _mobius_from_triples(z, w):
    """Mobius map sending the triple z to the triple w (complex)."""
    def to_std(p):
        # sends p0, p1, p2 to 0, 1, inf
        a, b, c = p
        return np.array([[b - c, -a * (b - c)], [b - a, -c * (b - a)]], dtype=complex)

    Mz = to_std(z)
    Mw = to_std(w)
    M = np.linalg.inv(Mw) @ Mz

    def fn(x):
        x = np.asarray(x, dtype=complex)
        return (M[0, 0] * x + M[0, 1]) / (M[1, 0] * x + M[1, 1])

    return fn


def blowup_rescale(m: DiscMap, event: dict | None, k_index: int = 8, delta_max: float | None = None,
                   n_curve: int = 4096, cl_radii: int = 48) -> tuple[DiscMap, dict]:
    """Rescale a concentrating map through a lune at the concentration point.

    The Courant–Lebesgue radius r is searched in (1/k, 1/sqrt(k)) about
    z0 = exp(i θ*).  The new map is u∘T with T = (rotation)∘(lune map)∘μ,
    μ the disc automorphism enforcing the three-point condition for the new
    boundary curve Γ̃ = u(∂(D ∩ D_r(z0))).
    """
    if event is None:
        raise ValueError("no concentration event to rescale")
    if k_index < 2:
        raise ValueError("k_index must be >= 2")
    theta = float(event["theta"])
    z0 = complex(math.cos(theta), math.sin(theta))
    s = 1.0 / k_index
    cl = courant_lebesgue_radius(m, (z0.real, z0.imag), s, n_radii=cl_radii, euclidean=True)
    r = cl["r"]
    E_tot = dirichlet_energy(m, euclidean=True)
    cl_bound = math.sqrt(8 * math.pi * E_tot / math.log(k_index))
    if delta_max is None:
        delta_max = cl_bound
    lune = lune_to_disc(r)
    rot = z0 / (-1.0)  # maps the lune at -1 to the lune at z0

    def T(zeta):
        return rot * lune.forward(zeta)

    loc = m.mesh.locator

    def u_at(zc):
        zc = np.asarray(zc, dtype=complex)
        return loc.interpolate(m.positions, np.column_stack([zc.real, zc.imag]))

    # dense boundary of the lune, ordered by the disc angle of its preimage
    phi_grid = 2 * np.pi * np.arange(n_curve) / n_curve
    pts = u_at(T(np.exp(1j * phi_grid)))
    seg = np.linalg.norm(np.diff(np.concatenate([pts, pts[:1]]), axis=0), axis=1)
    keep = seg > 1e-12 * max(1.0, float(np.max(seg)))
    # drop repeated points, keeping the parameter table consistent
    phi_k, pts_k = phi_grid[keep], pts[keep]
    curve_new = BoundaryCurve(pts_k)
    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(np.concatenate([pts_k, pts_k[:1]]), axis=0), axis=1))])
    Lnew = float(cum[-1])
    phix = np.concatenate([phi_k, [phi_k[0] + 2 * np.pi]])

    def t_of_phi(x):
        x = np.mod(np.asarray(x) - phi_k[0], 2 * np.pi) + phi_k[0]
        return np.interp(x, phix, cum)

    def phi_of_t(t):
        return np.interp(t, cum, phix)

    # cut arc β = image of D ∩ ∂D_r(z0): the part of the lune boundary off the unit circle
    on_small = np.abs(np.abs(T(np.exp(1j * phi_k))) - 1.0) > 1e-9
    beta_len = float(np.sum(np.linalg.norm(np.diff(np.concatenate([pts_k, pts_k[:1]]), axis=0), axis=1)[on_small]))
    if beta_len > delta_max:
        raise ValueError(f"cut arc length {beta_len:.4g} exceeds delta_max {delta_max:.4g}")

    # three-point normalisation: send 1, ω, ω² to the preimages of t = 0, L/3, 2L/3
    t0 = float(t_of_phi(0.0))
    targets = np.exp(1j * phi_of_t(np.mod(t0 + Lnew * np.array([0.0, 1 / 3, 2 / 3]), Lnew)))
    omega = np.exp(2j * np.pi / 3)
    mu = _mobius_from_triples(np.array([1.0, omega, omega**2]), targets)

    mesh = m.mesh
    Z = mesh.vertices[:, 0] + 1j * mesh.vertices[:, 1]
    zeta = mu(Z)
    bl = mesh.boundary_loop
    zeta[bl] /= np.abs(zeta[bl])
    if np.any(np.abs(np.delete(zeta, bl)) >= 1):
        raise RuntimeError("three-point normalisation does not preserve the disc")
    X = u_at(T(zeta))
    tb = np.asarray(t_of_phi(np.angle(zeta[bl])))
    tb = tb[0] + np.mod(tb - tb[0], Lnew)
    tb[1:] = np.maximum(tb[1:], np.maximum.accumulate(tb)[:-1])
    X[bl] = curve_new(tb)
    new_map = DiscMap(mesh=mesh, positions=X, boundary_params=tb, curve=curve_new, metric=m.metric)

    # energy split over the lune and its complement (Euclidean)
    E_ret = subdisc_energy(m, (z0.real, z0.imag), r, euclidean=True)
    E_dis = E_tot - E_ret
    info = {
        "theta": theta,
        "k": k_index,
        "s": s,
        "r": r,
        "cl_arc_length": cl["arc_length"],
        "cl_bound": cl["bound"],
        "cut_arc_length": beta_len,
        "cut_arc_bound": cl_bound,
        "cut_arc_pass": beta_len <= cl_bound,
        "energy_total": E_tot,
        "energy_retained": E_ret,
        "energy_discarded": E_dis,
        "rescaled_energy": dirichlet_energy(new_map, euclidean=True),
        "curve_length": Lnew,
        "coverage_before": boundary_coverage(m),
        "coverage_after": boundary_coverage(new_map),
        "drop_nonnegative": E_dis >= -1e-12,
    }
    return new_map, info


def run_blowup(m: DiscMap, k_index: int = 8, window: float | None = None, threshold: float = 0.9,
               max_depth: int = 3, resolve: bool = False, opts: PlateauOptions | None = None,
               delta_max: float | None = None) -> tuple[DiscMap, list[dict]]:
    """Detect, rescale and (optionally) re-solve until no concentration remains.

    Without ``resolve`` the rescaled map itself is the next working map.
    Rescaled curves carry corners where the lune arcs meet, so a re-solve
    may stop short of ``opts.gtol``; its status is recorded per event.
    """
    window = 2.0 / k_index if window is None else window
    lineage = []
    cur = m
    for depth in range(max_depth):
        event = detect_concentration(cur, window, threshold)
        if event is None:
            break
        new_map, info = blowup_rescale(cur, event, k_index, delta_max=delta_max)
        info["depth"] = depth
        info["event"] = event
        if resolve:
            res = solve_plateau(new_map.curve, new_map.mesh, new_map.metric, init=new_map, opts=opts)
            new_map = res.map
            info["resolved_energy"] = res.energy
            info["resolved_euclidean_energy"] = dirichlet_energy(new_map, euclidean=True)
            info["coverage_resolved"] = boundary_coverage(new_map)
            info["resolved_converged"] = res.converged
        lineage.append(info)
        cur = new_map
    return cur, lineage


def concentration_fixture(level: int = 5, radius: float = 0.8, delta: float = 0.01, n_curve: int = 4096,
                          dimension: int = 3) -> DiscMap:
    """Flat disc of radius ``radius`` parametrised by a Mobius push toward -1.

    u(z) = radius · M_a(z) with M_a(z) = (z - a)/(1 - a z), a = -1 + delta,
    in the flat metric; almost all of the boundary circle is traversed by a
    short arc of the disc boundary around θ = π.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    mesh = build_mesh(level)
    a = -1.0 + delta
    Z = mesh.vertices[:, 0] + 1j * mesh.vertices[:, 1]
    W = (Z - a) / (1 - a * Z)
    X = np.zeros((len(Z), dimension))
    X[:, 0], X[:, 1] = radius * W.real, radius * W.imag
    th = 2 * np.pi * np.arange(n_curve) / n_curve
    samples = np.zeros((n_curve, dimension))
    samples[:, 0], samples[:, 1] = radius * np.cos(th), radius * np.sin(th)
    curve = BoundaryCurve(samples)
    bl = mesh.boundary_loop
    ang = np.unwrap(np.angle(W[bl]))
    t = curve.L * (ang - ang[0]) / (2 * np.pi) + curve.L * np.mod(ang[0], 2 * np.pi) / (2 * np.pi)
    X[bl] = curve(t)
    return DiscMap(mesh=mesh, positions=X, boundary_params=t, curve=curve,
                   metric=AmbientMetric.flat(dimension))


# --------------------------------------------------------------------------
# modified curves and the Euclidean area floor
# --------------------------------------------------------------------------
def notched_circle(radius: float, notch: float, depth: float | None = None, n: int = 4096,
                   dimension: int = 3) -> BoundaryCurve:
    """Planar circle whose arc of length ``notch`` around angle 0 is pushed inward."""
    th = 2 * np.pi * np.arange(n) / n
    half = 0.5 * notch / radius
    depth = notch / 2 if depth is None else depth
    d = np.minimum(np.abs(th), 2 * np.pi - th)
    bump = np.where(d < half, depth * np.cos(0.5 * np.pi * d / max(half, 1e-300)) ** 2, 0.0)
    rad = radius - bump
    out = np.zeros((n, dimension))
    out[:, 0], out[:, 1] = rad * np.cos(th), rad * np.sin(th)
    return BoundaryCurve(out)


def modified_curve_threshold(curves, eps: float, delta: float, baseline: float | None = None,
                             level: int = 4, opts: PlateauOptions | None = None) -> dict:
    """Smallest Euclidean minimal area over modified curves vs. baseline - (eps + delta)^2.

    ``baseline`` defaults to the area of the first curve's solution.
    """
    curves = list(curves)
    if not curves:
        raise ValueError("need at least one curve")
    metric = AmbientMetric.flat(curves[0].dimension)
    areas = []
    for c in curves:
        res = solve_multilevel(c, level, metric, opts or PlateauOptions())
        areas.append(res.area)
    base = areas[0] if baseline is None else baseline
    a0 = float(min(areas))
    floor = base - (eps + delta) ** 2
    return {"a0": a0, "areas": areas, "baseline": base, "floor": floor, "eps": eps, "delta": delta,
            "passed": a0 >= floor}
