"""Discrete Plateau problem: minimise the Dirichlet energy of P1 disc maps.

A map is a piecewise-linear image of the polar disc mesh.  Interior vertices
move freely; boundary vertices slide along the boundary curve through a
monotone parameter per vertex, with three anchors frozen to remove the
Mobius gauge.  Energies use the cotangent form with the metric tensor
averaged over each image triangle's corners.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from .ambient_metric import AmbientMetric, euclidean_areas
from .disc_mesh import DiscMesh, clip_triangles, disc_automorphism

__all__ = [
    "BoundaryCurve",
    "DiscMap",
    "PlateauOptions",
    "PlateauResult",
    "dirichlet_energy",
    "energy_gradient",
    "triangle_energy_density",
    "surface_area",
    "conformality_defect",
    "harmonic_extension",
    "resample_map",
    "solve_plateau",
    "recenter",
    "radial_spherical_check",
    "capacity_check",
    "interior_area_check",
    "subdisc_energy",
    "subdisc_area",
]


# --------------------------------------------------------------------------
# boundary curve
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class BoundaryCurve:
    """Closed polyline parametrised proportionally to Euclidean arclength."""

    samples: np.ndarray  # (N, n); the closing segment back to samples[0] is implied

    def __post_init__(self):
        P = np.asarray(self.samples, dtype=float)
        if P.ndim != 2 or len(P) < 3:
            raise ValueError("boundary curve needs at least 3 samples of shape (N, n)")
        if np.allclose(P[0], P[-1]):
            P = P[:-1]
        seg = np.roll(P, -1, axis=0) - P
        seglen = np.linalg.norm(seg, axis=1)
        if np.any(seglen <= 0):
            raise ValueError("repeated consecutive samples on boundary curve")
        object.__setattr__(self, "samples", P)
        object.__setattr__(self, "_seg", seg)
        object.__setattr__(self, "_seglen", seglen)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seglen)]))

    @property
    def L(self) -> float:
        return float(self._cum[-1])

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    def _locate(self, t):
        t = np.mod(np.asarray(t, dtype=float), self.L)
        j = np.clip(np.searchsorted(self._cum, t, side="right") - 1, 0, len(self.samples) - 1)
        return t, j

    def __call__(self, t) -> np.ndarray:
        t, j = self._locate(t)
        w = (t - self._cum[j]) / self._seglen[j]
        return self.samples[j] + w[..., None] * self._seg[j]

    def tangent(self, t) -> np.ndarray:
        """dγ/dt (unit Euclidean length, one-sided at sample nodes)."""
        _, j = self._locate(t)
        return self._seg[j] / self._seglen[j][..., None]

    def is_simple(self) -> bool:
        """No two non-adjacent samples closer than a quarter of the shortest segment."""
        tree = cKDTree(self.samples)
        pairs = tree.query_pairs(0.25 * float(self._seglen.min()), output_type="ndarray")
        if pairs.size == 0:
            return True
        d = np.abs(pairs[:, 0] - pairs[:, 1])
        d = np.minimum(d, len(self.samples) - d)
        return bool(np.all(d <= 1))

    def scaled(self, factor: float) -> "BoundaryCurve":
        return BoundaryCurve(self.samples * factor)


# --------------------------------------------------------------------------
# disc maps
# --------------------------------------------------------------------------
def _anchor_slots(nb: int) -> np.ndarray:
    return np.array([0, nb // 3, (2 * nb) // 3])


@dataclass(frozen=True)
class DiscMap:
    """P1 map of the disc mesh into the ball.

    ``boundary_params`` are unwrapped curve parameters of the boundary loop
    (increasing, total increase < L); boundary positions equal
    ``curve(boundary_params)`` exactly.
    """

    mesh: DiscMesh
    positions: np.ndarray
    boundary_params: np.ndarray
    curve: BoundaryCurve
    metric: AmbientMetric
    anchors: tuple[int, int, int] = None

    def __post_init__(self):
        if self.anchors is None:
            object.__setattr__(self, "anchors", tuple(int(i) for i in _anchor_slots(len(self.mesh.boundary_loop))))

    @property
    def boundary_positions(self) -> np.ndarray:
        return self.positions[self.mesh.boundary_loop]

    def gaps(self) -> np.ndarray:
        t = self.boundary_params
        return np.diff(np.concatenate([t, [t[0] + self.curve.L]]))

    def with_positions(self, X: np.ndarray) -> "DiscMap":
        return replace(self, positions=X)

    def image_triangles(self) -> np.ndarray:
        return self.positions[self.mesh.triangles]

    def to_obj(self, path) -> None:
        from .io import write_obj
        write_obj(path, self.positions, self.mesh.triangles)


def _mesh_cache(mesh: DiscMesh) -> dict:
    cache = getattr(mesh, "_plateau_cache", None)
    if cache is None:
        P = mesh.vertices[mesh.triangles]
        cot = np.empty((len(P), 3))
        for k in range(3):
            a = P[:, (k + 1) % 3] - P[:, k]
            b = P[:, (k + 2) % 3] - P[:, k]
            cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
            cot[:, k] = np.einsum("ij,ij->i", a, b) / cross
        # cot[:, k] is the cotangent at vertex k, weighting the opposite edge
        T = mesh.triangles
        rows = np.concatenate([T[:, 1], T[:, 2], T[:, 0]])
        cols = np.concatenate([T[:, 2], T[:, 0], T[:, 1]])
        w = 0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])
        V = len(mesh.vertices)
        W = sp.coo_matrix((w, (rows, cols)), shape=(V, V)).tocsr()
        W = W + W.T
        Lap = sp.diags(np.asarray(W.sum(axis=1)).ravel()) - W
        cache = {"cot": cot, "laplacian": Lap.tocsr(), "diag": np.asarray(Lap.diagonal()).copy(),
                 "domain_area": np.abs(mesh.signed_areas())}
        object.__setattr__(mesh, "_plateau_cache", cache)
    return cache


def _scatter(mesh: DiscMesh, per_corner: np.ndarray) -> np.ndarray:
    """Sum (T, 3, n) corner contributions into vertices in a fixed order."""
    V = len(mesh.vertices)
    idx = mesh.triangles.ravel()
    flat = per_corner.reshape(-1, per_corner.shape[-1])
    return np.column_stack([np.bincount(idx, weights=flat[:, d], minlength=V) for d in range(flat.shape[1])])


def _assemble(metric: AmbientMetric, mesh: DiscMesh, X: np.ndarray, want_grad: bool,
              euclidean: bool = False):
    cot = _mesh_cache(mesh)["cot"]
    P = X[mesh.triangles]
    T, _, n = P.shape
    # edge opposite corner k runs from corner k+1 to corner k+2
    Ed = P[:, [2, 0, 1]] - P[:, [1, 2, 0]]
    flat = euclidean or metric.is_flat
    B = None
    if flat:
        lam2c = np.ones((T, 3))
    else:
        # metric averaged over the three corners; a barycentre sample would let
        # triangles reaching the boundary hide its blow-up
        lam2c, dlam2c = metric.lam2(P.reshape(-1, n), with_grad=True)
        lam2c = lam2c.reshape(T, 3)
        dlam2c = dlam2c.reshape(T, 3, n)
        B = metric.bmat(P.reshape(-1, n))
    if B is None:
        lam2 = lam2c.mean(axis=1)
        ME = lam2[:, None, None] * Ed
    else:
        Bc = B.reshape(T, 3, n, n)
        M = np.einsum("tc,tcij->tij", lam2c, Bc) / 3.0
        ME = np.einsum("tij,tkj->tki", M, Ed)
    q = np.sum(Ed * ME, axis=2)
    eT = 0.25 * np.sum(cot * q, axis=1)
    if not want_grad:
        return eT, None
    coef = 0.5 * cot[:, :, None] * ME  # dE/d(edge k)
    corner = np.zeros_like(P)
    corner[:, [2, 0, 1]] += coef
    corner[:, [1, 2, 0]] -= coef
    if not flat:
        if B is None:
            s = np.sum(cot * np.sum(Ed * Ed, axis=2), axis=1)
            corner += (0.25 / 3.0) * s[:, None, None] * dlam2c
        else:
            dB = metric.bmat_grad(P.reshape(-1, n)).reshape(T, 3, n, n, n)
            sB = np.einsum("tk,tki,tcij,tkj->tc", cot, Ed, Bc, Ed)
            sdB = np.einsum("tk,tki,tcijl,tkj->tcl", cot, Ed, dB, Ed)
            corner += (0.25 / 3.0) * (sB[:, :, None] * dlam2c + lam2c[:, :, None] * sdB)
    return eT, _scatter(mesh, corner)


def _check_safe(metric: AmbientMetric, X: np.ndarray) -> None:
    if metric.is_flat:
        return
    r = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(r >= metric.safe_radius)
    if bad.size:
        raise ValueError(f"vertex {int(bad[0])} at |x| = {r[bad[0]]:.12g} outside the safe ball "
                         f"(|x| < {metric.safe_radius:.12g})")


def triangle_energy_density(m: DiscMap, euclidean: bool = False) -> np.ndarray:
    """Dirichlet energy per unit domain area, one value per triangle."""
    _check_safe(m.metric, m.positions)
    eT, _ = _assemble(m.metric, m.mesh, m.positions, False, euclidean)
    return eT / _mesh_cache(m.mesh)["domain_area"]


def dirichlet_energy(m: DiscMap, euclidean: bool = False) -> float:
    _check_safe(m.metric, m.positions)
    eT, _ = _assemble(m.metric, m.mesh, m.positions, False, euclidean)
    return float(np.sum(eT))


def energy_gradient(m: DiscMap, euclidean: bool = False) -> tuple[float, np.ndarray]:
    """Energy and its gradient with respect to every vertex position."""
    _check_safe(m.metric, m.positions)
    eT, g = _assemble(m.metric, m.mesh, m.positions, True, euclidean)
    return float(np.sum(eT)), g


def surface_area(m: DiscMap, euclidean: bool = False, b_only: bool = False) -> float:
    _check_safe(m.metric, m.positions)
    tri = m.image_triangles()
    if euclidean or m.metric.is_flat:
        return float(np.sum(euclidean_areas(tri)))
    return float(np.sum(m.metric.triangle_areas(tri, b_only=b_only)))


def conformality_defect(m: DiscMap, euclidean: bool = False) -> float:
    return dirichlet_energy(m, euclidean) - surface_area(m, euclidean)


# --------------------------------------------------------------------------
# initial maps and resampling
# --------------------------------------------------------------------------
def harmonic_extension(mesh: DiscMesh, curve: BoundaryCurve, metric: AmbientMetric,
                       boundary_params: np.ndarray | None = None) -> DiscMap:
    """Cotangent-weight harmonic extension of the boundary samples."""
    nb = len(mesh.boundary_loop)
    if boundary_params is None:
        boundary_params = curve.L * np.arange(nb) / nb
    boundary_params = np.asarray(boundary_params, dtype=float)
    Lap = _mesh_cache(mesh)["laplacian"]
    bl = mesh.boundary_loop
    inner = mesh.interior
    X = np.zeros((len(mesh.vertices), curve.dimension))
    X[bl] = curve(boundary_params)
    A = Lap[inner][:, inner].tocsc()
    rhs = -Lap[inner][:, bl] @ X[bl]
    sol = spsolve(A, rhs)
    X[inner] = sol.reshape(len(inner), -1)
    return DiscMap(mesh=mesh, positions=X, boundary_params=boundary_params, curve=curve, metric=metric)


def _unwrap_params(theta_old: np.ndarray, t_old: np.ndarray, L: float, theta_new: np.ndarray) -> np.ndarray:
    """Periodic monotone interpolation of boundary parameters in angle."""
    th = np.mod(theta_old, 2 * np.pi)
    order = np.argsort(th)
    th, tt = th[order], t_old[order]
    tt = tt[0] + np.mod(tt - tt[0], L)
    tt = np.maximum.accumulate(tt)
    thx = np.concatenate([th[-1:] - 2 * np.pi, th, th[:1] + 2 * np.pi])
    ttx = np.concatenate([tt[-1:] - L, tt, tt[:1] + L])
    return np.interp(np.mod(theta_new, 2 * np.pi), thx, ttx)


def resample_map(m: DiscMap, mesh: DiscMesh | None = None, warp=None,
                 curve: BoundaryCurve | None = None, metric: AmbientMetric | None = None,
                 scale: float = 1.0, anchors_from_params: bool = True) -> DiscMap:
    """Evaluate ``m`` (optionally precomposed with a disc map ``warp``) on a mesh.

    Interior positions come from barycentric interpolation and are multiplied
    by ``scale``.  Boundary parameters are interpolated in angle; when a new
    ``curve`` is given they are rescaled by the ratio of lengths, so boundary
    vertices land on the new curve exactly.
    """
    mesh = m.mesh if mesh is None else mesh
    curve_new = m.curve if curve is None else curve
    metric = m.metric if metric is None else metric
    Z = mesh.vertices
    if warp is not None:
        w = warp(Z[:, 0] + 1j * Z[:, 1])
        Z = np.column_stack([w.real, w.imag])
    X = m.mesh.locator.interpolate(m.positions, Z) * scale
    old_bl = m.mesh.boundary_loop
    theta_old = np.arctan2(m.mesh.vertices[old_bl, 1], m.mesh.vertices[old_bl, 0])
    bl = mesh.boundary_loop
    zb = Z[bl]
    theta_new = np.arctan2(zb[:, 1], zb[:, 0])
    t_new = _unwrap_params(theta_old, m.boundary_params, m.curve.L, theta_new)
    t_new = t_new * (curve_new.L / m.curve.L)
    # keep an increasing representative starting at the first boundary vertex
    t_new = t_new[0] + np.mod(t_new - t_new[0], curve_new.L)
    t_new[1:] = np.maximum(t_new[1:], np.maximum.accumulate(t_new)[:-1])
    X[bl] = curve_new(t_new)
    return DiscMap(mesh=mesh, positions=X, boundary_params=t_new, curve=curve_new, metric=metric)


# --------------------------------------------------------------------------
# solver
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class PlateauOptions:
    gtol: float = 1e-7
    max_iter: int = 3000
    rounds: int = 4
    gap_factor: float = 1e-4
    init: str = "harmonic-extension"
    memory: int = 30
    defect_tol: float = 1e-3
    # gaps above gap_cap * L / nb are penalised; None disables the cap
    gap_cap: float | None = 8.0
    precision_gtol: float = 1e-5
    gap_penalty: float = 1e4


@dataclass
class PlateauResult:
    map: DiscMap
    energy: float
    area: float
    conformality_defect: float
    iterations: int
    grad_norm: float
    converged: bool
    flags: tuple[str, ...] = ()
    history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rounds: list = field(default_factory=list)
    seconds: float = 0.0

    def summary(self) -> dict:
        return {
            "energy": self.energy,
            "area": self.area,
            "conformality_defect": self.conformality_defect,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "converged": self.converged,
            "flags": list(self.flags),
            "level": self.map.mesh.level,
        }

    def to_json(self, path) -> None:
        from .io import write_json
        write_json(path, self.summary())

    def to_obj(self, path) -> None:
        self.map.to_obj(path)


class _Problem:
    """Packs interior coordinates and boundary gap logits into one vector.

    Between consecutive anchors the gaps are eps + S * softmax(v), S the
    arc's parameter budget above the minimal gaps, so every iterate keeps
    the boundary parameters increasing with gaps >= eps.
    """

    def __init__(self, m: DiscMap, eps: float, gmax: float | None = None, penalty: float = 0.0):
        self.m = m
        self.mesh = m.mesh
        self.inner = m.mesh.interior
        self.bl = m.mesh.boundary_loop
        self.nb = len(self.bl)
        self.n = m.positions.shape[1]
        self.eps = eps
        self.L = m.curve.L
        self.X = m.positions.copy()
        self.t = m.boundary_params.copy()
        anchors = sorted(m.anchors)
        ends = anchors[1:] + [anchors[0] + self.nb]
        self.gmax = gmax
        self.kappa = 0.0
        self.arcs = []
        for a, b in zip(anchors, ends):
            ext = np.arange(a, b + 1)
            self.arcs.append({"ext": ext, "free": ext[1:-1]})
        self._set_budgets()
        self.refresh_scaling()
        if gmax is not None:
            # long boundary chords let the surface cut across concave parts of the curve
            e0 = float(np.sum(_assemble(m.metric, m.mesh, self.X, False)[0]))
            self.kappa = penalty * max(e0, 1e-300) / gmax**2

    def _t_ext(self, t, ext):
        return t[ext % self.nb] + self.L * (ext >= self.nb)

    def _set_budgets(self):
        for arc in self.arcs:
            te = self._t_ext(self.t, arc["ext"])
            k = len(te) - 1
            arc["t0"] = te[0]
            arc["S"] = te[-1] - te[0] - k * self.eps
            if arc["S"] <= 0:
                raise ValueError("anchor spacing too small for the minimal gap")
            gaps = np.diff(te)
            arc["v"] = np.log(np.maximum(gaps - self.eps, 1e-14 * arc["S"]) / arc["S"])

    def refresh_scaling(self):
        diag = _mesh_cache(self.mesh)["diag"]
        metric = self.m.metric
        lam2 = np.ones(len(self.X)) if metric.is_flat else metric.lam2(self.X)
        d = 0.5 * lam2 * diag
        if metric.perturbation is not None:
            d = d * metric.b_bounds[1]
        self.sx = np.sqrt(d[self.inner])
        for arc in self.arcs:
            te = self._t_ext(self.t, arc["ext"])
            db = float(np.mean(d[self.bl][arc["ext"] % self.nb]))
            arc["sv"] = math.sqrt(db) * np.diff(te)

    def pack(self) -> np.ndarray:
        parts = [(self.X[self.inner] * self.sx[:, None]).ravel()]
        parts += [arc["v"] * arc["sv"] for arc in self.arcs]
        return np.concatenate(parts)

    def unpack(self, y: np.ndarray):
        ni = len(self.inner) * self.n
        X = self.X.copy()
        X[self.inner] = y[:ni].reshape(-1, self.n) / self.sx[:, None]
        t = self.t.copy()
        pos = ni
        sig = []
        for arc in self.arcs:
            k = len(arc["ext"]) - 1
            v = y[pos:pos + k] / arc["sv"]
            pos += k
            w = np.exp(v - v.max())
            w /= w.sum()
            sig.append(w)
            vals = arc["t0"] + np.cumsum(self.eps + arc["S"] * w)[:-1]
            free = arc["free"]
            t[free % self.nb] = vals - self.L * (free >= self.nb)
        X[self.bl] = self.m.curve(t)
        return X, t, sig

    def commit(self, y: np.ndarray):
        X, t, _ = self.unpack(y)
        self.X, self.t = X, t
        self._set_budgets()
        self.refresh_scaling()

    def objective(self, y: np.ndarray):
        X, t, sig = self.unpack(y)
        metric = self.m.metric
        r = np.linalg.norm(X, axis=1)
        rs = metric.safe_radius * (1 - 1e-9)
        over = r > rs
        if np.any(over):
            # radial clamp plus a stiff quadratic penalty keeps line searches inside the ball
            Xc = X.copy()
            Xc[over] *= (rs / r[over])[:, None]
            eT, G = _assemble(metric, self.mesh, Xc, True)
            E0 = float(np.sum(eT))
            kappa = 1e8 * max(E0, 1.0)
            E = E0 + kappa * float(np.sum((r[over] - rs) ** 2))
            G[over] = (2 * kappa * (r[over] - rs) / r[over])[:, None] * X[over]
        else:
            eT, G = _assemble(metric, self.mesh, X, True)
            E = float(np.sum(eT))
        parts = [(G[self.inner] / self.sx[:, None]).ravel()]
        Gb = G[self.bl]
        for arc, w in zip(self.arcs, sig):
            free = arc["free"] % self.nb
            dEdt = np.einsum("ij,ij->i", Gb[free], self.m.curve.tangent(t[free]))
            # t_i = t0 + sum_{j<=i} gap_j, the last gap only closes the arc
            dEdg = np.concatenate([np.cumsum(dEdt[::-1])[::-1], [0.0]])
            if self.kappa > 0:
                excess = np.maximum(self.eps + arc["S"] * w - self.gmax, 0.0)
                E += self.kappa * float(np.sum(excess**2))
                dEdg = dEdg + 2 * self.kappa * excess
            dEdv = arc["S"] * w * (dEdg - np.dot(w, dEdg))
            parts.append(dEdv / arc["sv"])
        return E, np.concatenate(parts)


def _grad_norm(g: np.ndarray, E: float) -> float:
    return float(np.linalg.norm(g) / math.sqrt(max(2.0 * E, 1e-300)))


def solve_plateau(curve: BoundaryCurve, mesh: DiscMesh, metric: AmbientMetric,
                  init: str | DiscMap = "harmonic-extension",
                  opts: PlateauOptions | None = None) -> PlateauResult:
    """Minimise the Dirichlet energy over interior positions and boundary parameters.

    ``init`` is ``"harmonic-extension"`` or a prior :class:`DiscMap` (any
    level, any curve scale), which is resampled onto ``mesh``.  Runs up to
    ``opts.rounds`` L-BFGS passes, refreshing the diagonal preconditioner
    and the gap budgets between passes.
    """
    opts = opts or PlateauOptions()
    t0 = time.perf_counter()
    if curve.dimension != metric.dimension:
        raise ValueError("curve and metric dimensions differ")
    if not metric.is_flat:
        r = np.linalg.norm(curve.samples, axis=1)
        if np.any(r >= metric.safe_radius):
            raise ValueError("boundary curve leaves the safe ball")
    if isinstance(init, DiscMap):
        m0 = resample_map(init, mesh=mesh, curve=curve, metric=metric)
        m0 = replace(m0, anchors=tuple(int(i) for i in _anchor_slots(len(mesh.boundary_loop))))
    elif init in ("harmonic-extension", "prior-map"):
        if init == "prior-map":
            raise ValueError("prior-map init needs a DiscMap")
        m0 = harmonic_extension(mesh, curve, metric)
    else:
        raise ValueError(f"unknown init {init!r}")

    nb = len(mesh.boundary_loop)
    eps = curve.L * opts.gap_factor / nb
    gmax = None if opts.gap_cap is None else opts.gap_cap * curve.L / nb
    prob = _Problem(m0, eps, gmax, opts.gap_penalty)
    history: list[float] = []
    rounds = []
    flags: list[str] = []
    total_it = 0
    converged = False
    gnorm = math.inf
    for rnd in range(opts.rounds):
        y0 = prob.pack()
        last = {}

        def fun(y):
            E_, g_ = prob.objective(y)
            last["y"], last["E"], last["g"] = y, E_, g_
            return E_, g_

        def cb(intermediate_result):
            history.append(float(intermediate_result.fun))
            if "g" in last and np.array_equal(last["y"], intermediate_result.x):
                if _grad_norm(last["g"], last["E"]) <= opts.gtol:
                    raise StopIteration

        E_start, g_start = fun(y0)
        if rnd == 0:
            history.append(E_start)
        if _grad_norm(g_start, E_start) <= opts.gtol:
            gnorm = _grad_norm(g_start, E_start)
            converged = True
            break
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(fun, y0, jac=True, method="L-BFGS-B", callback=cb,
                           options={"maxiter": opts.max_iter, "maxcor": opts.memory,
                                    "gtol": 0.0, "ftol": 1e-16, "maxls": 40})
        prob.commit(res.x)
        E, g = prob.objective(prob.pack())
        gnorm = _grad_norm(g, E)
        total_it += int(res.nit)
        rounds.append({"round": rnd, "iterations": int(res.nit), "energy": E, "grad_norm": gnorm,
                       "message": str(res.message)})
        if gnorm <= opts.gtol:
            converged = True
            break
        # a stop on relative energy reduction at machine precision is accepted
        # when the gradient is already within the floating-point floor
        if "REDUCTION OF F" in str(res.message) and gnorm <= opts.precision_gtol:
            converged = True
            flags.append("precision-limited")
            break
        if res.nit == 0:
            break
    if not converged:
        flags.append("not-converged")
    final = replace(m0, positions=prob.X, boundary_params=prob.t)
    gaps = final.gaps()
    # many gaps pinned at eps means the parametrisation is collapsing somewhere
    if np.mean(gaps <= 1.01 * eps) > 0.25:
        flags.append("concentration-suspected")
    if gmax is not None and np.any(gaps > gmax * (1 + 1e-3)):
        flags.append("gap-cap-active")
    E = dirichlet_energy(final)
    A = surface_area(final)
    return PlateauResult(map=final, energy=E, area=A, conformality_defect=E - A, iterations=total_it,
                         grad_norm=gnorm, converged=converged, flags=tuple(flags),
                         history=np.asarray(history), rounds=rounds,
                         seconds=time.perf_counter() - t0)


# --------------------------------------------------------------------------
# post-processing and property checks
# --------------------------------------------------------------------------
def recenter(m: DiscMap) -> tuple[DiscMap, dict]:
    """Precompose with the disc automorphism moving the most central image to 0."""
    rho = m.metric.geodesic_radius(m.positions)
    v = int(np.argmin(rho))
    if v in set(m.mesh.boundary_loop.tolist()):
        raise ValueError("most central image is on the boundary ring; resolve concentration first")
    z = m.mesh.vertices[v]
    zstar = complex(z[0], z[1])
    if v == 0:
        return m, {"z_star": (0.0, 0.0), "vertex": v, "moved": False}
    fwd, _ = disc_automorphism(zstar)
    out = resample_map(m, warp=fwd)
    out = replace(out, anchors=m.anchors)
    return out, {"z_star": (z[0], z[1]), "vertex": v, "moved": True}


def radial_spherical_check(m: DiscMap) -> dict:
    """Per triangle, radial part of |du|^2 against the spherical part.

    Both parts use the metric at the image barycentre; the reported excess
    is normalised by the mean energy density.  Rotationally symmetric
    metrics only.
    """
    if not m.metric.is_rotational:
        raise ValueError("radial/spherical split needs a rotationally symmetric metric")
    mesh = m.mesh
    P = m.image_triangles()
    D = mesh.vertices[mesh.triangles]
    # affine differential J = [image edges] @ inverse(domain edges)
    De = np.stack([D[:, 1] - D[:, 0], D[:, 2] - D[:, 0]], axis=2)  # (T, 2, 2)
    Pe = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)  # (T, n, 2)
    J = Pe @ np.linalg.inv(De)
    bary = P.mean(axis=1)
    rr = np.linalg.norm(bary, axis=1)
    keep = rr > 1e-9
    nrm = bary[keep] / rr[keep, None]
    lam2 = m.metric.lam2(bary[keep])
    total = lam2 * np.sum(J[keep] ** 2, axis=(1, 2))
    radial = lam2 * np.sum(np.einsum("ti,tij->tj", nrm, J[keep]) ** 2, axis=1)
    spher = total - radial
    scale = float(np.mean(total))
    excess = (radial - spher) / scale
    return {"max_excess": float(np.max(excess)), "mean_density": scale,
            "fraction_violating": float(np.mean(excess > 0))}


def _subdisc_pieces(m: DiscMap, center, radius: float):
    mesh = m.mesh
    dom = mesh.vertices[mesh.triangles]
    parent, bary = clip_triangles(dom, np.asarray(center, float), radius)
    return parent, bary


def subdisc_energy(m: DiscMap, center=(0.0, 0.0), radius: float = 0.5, euclidean: bool = False) -> float:
    """Energy of the map restricted to D ∩ D_radius(center)."""
    parent, bary = _subdisc_pieces(m, center, radius)
    dens = triangle_energy_density(m, euclidean)
    area = _mesh_cache(m.mesh)["domain_area"]
    return float(np.sum(dens[parent] * area[parent] * np.abs(np.linalg.det(bary))))


def subdisc_area(m: DiscMap, center=(0.0, 0.0), radius: float = 0.5) -> float:
    """Image area of D ∩ D_radius(center), pieces re-evaluated at their own barycentres."""
    parent, bary = _subdisc_pieces(m, center, radius)
    img = np.einsum("kvj,kjd->kvd", bary, m.image_triangles()[parent])
    if m.metric.is_flat:
        return float(np.sum(euclidean_areas(img)))
    return float(np.sum(m.metric.triangle_areas(img)))


def capacity_check(m: DiscMap, a: float, rho: float = 0.5, tol: float = 0.05) -> dict:
    """E(u, D_rho(0)) against 8 a^-2 cap(D_rho, D) with cap = pi / -ln(rho)."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if a <= 0:
        raise ValueError("capacity bound needs a > 0")
    cap = math.pi / -math.log(rho)
    E = subdisc_energy(m, (0.0, 0.0), rho)
    bound = 8.0 * cap / a**2
    return {"energy": E, "capacity": cap, "bound": bound, "tol": tol, "passed": E <= bound * (1 + tol)}


def interior_area_check(m: DiscMap, z0, r: float, n: int = 256, tol: float = 1e-6) -> dict:
    """area(u|D_r(z0)) against pi * delta^2, delta from geodesic-radius differences.

    |r(u(w)) - r(u(z0))| underestimates the distance d(u(z0), u(w)), so the
    resulting delta is a valid (weaker) lower bound.  Rotationally symmetric
    metrics only.
    """
    if not m.metric.is_rotational:
        raise ValueError("interior area check needs a rotationally symmetric metric")
    z0 = np.asarray(z0, dtype=float)
    if np.linalg.norm(z0) + r >= 1:
        raise ValueError("D_r(z0) must lie inside the disc")
    loc = m.mesh.locator
    phi = 2 * np.pi * np.arange(n) / n
    ring = z0 + r * np.column_stack([np.cos(phi), np.sin(phi)])
    u0 = loc.interpolate(m.positions, z0[None])
    ur = loc.interpolate(m.positions, ring)
    rho0 = m.metric.geodesic_radius(u0)[0]
    delta = float(np.min(np.abs(m.metric.geodesic_radius(ur) - rho0)))
    area = subdisc_area(m, z0, r)
    return {"area": area, "delta": delta, "bound": math.pi * delta**2, "tol": tol,
            "passed": area >= math.pi * delta**2 - tol}
