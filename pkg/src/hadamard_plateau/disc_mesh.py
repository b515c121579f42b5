"""Triangulated parameter disc, point location, clipping and the lune map."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "DiscMesh",
    "build_mesh",
    "collar_distances",
    "MeshLocator",
    "clip_triangles",
    "courant_lebesgue_radius",
    "circle_intersection_angle",
    "LuneMap",
    "lune_to_disc",
    "disc_automorphism",
]


@dataclass(frozen=True)
class DiscMesh:
    """Concentric polar mesh of the closed unit disc.

    Ring j (radius j/M, M = 2**level) carries 6j equally spaced vertices;
    consecutive rings are zipped by angle.  Vertex 0 is the centre and the
    boundary loop is the last ring in counter-clockwise order.  An optional
    collar of 6M-vertex rings, graded toward the unit circle, follows ring
    M (which then moves to radius 1 - h/2).
    """

    vertices: np.ndarray  # (V, 2)
    triangles: np.ndarray  # (T, 3) CCW
    boundary_loop: np.ndarray  # (nb,)
    level: int
    ring_start: np.ndarray  # first vertex index of each ring, plus end sentinel
    collar: tuple = ()  # distances of graded boundary rings from the unit circle
    _locator: "MeshLocator" = field(default=None, init=False, repr=False, compare=False)

    @property
    def rings(self) -> int:
        return 2**self.level

    @property
    def h(self) -> float:
        """Radial mesh spacing."""
        return 1.0 / self.rings

    @property
    def interior(self) -> np.ndarray:
        mask = np.ones(len(self.vertices), bool)
        mask[self.boundary_loop] = False
        return np.flatnonzero(mask)

    def ring(self, j: int) -> np.ndarray:
        return np.arange(self.ring_start[j], self.ring_start[j + 1])

    @property
    def edges(self) -> np.ndarray:
        e = np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges) + len(self.triangles)

    def min_angle(self) -> float:
        P = self.vertices[self.triangles]
        angs = []
        for k in range(3):
            a = P[:, (k + 1) % 3] - P[:, k]
            b = P[:, (k + 2) % 3] - P[:, k]
            c = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angs.append(np.arccos(np.clip(c, -1, 1)))
        return float(np.degrees(np.min(angs)))

    def signed_areas(self) -> np.ndarray:
        P = self.vertices[self.triangles]
        e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def locator(self) -> "MeshLocator":
        if self._locator is None:
            object.__setattr__(self, "_locator", MeshLocator(self.vertices, self.triangles))
        return self._locator

    def to_obj(self, path) -> None:
        from .io import write_obj
        pts = np.column_stack([self.vertices, np.zeros(len(self.vertices))])
        write_obj(path, pts, self.triangles)


def collar_distances(level: int, gap: float | None, ratio: float = 1.25) -> np.ndarray:
    """Distances from the unit circle of the collar rings, innermost first.

    ``gap`` is the distance from the boundary circle to where the image
    metric blows up.  Distances grow like (gap + d) * ratio so that the
    metric changes by a bounded factor across each collar strip; rings
    start below half the radial spacing.  Empty when no collar is needed.
    """
    if gap is None:
        return np.zeros(0)
    if gap <= 0 or ratio <= 1:
        raise ValueError("collar needs gap > 0 and ratio > 1")
    half = 0.5 / 2**level
    d = []
    i = 1
    while True:
        di = gap * (ratio**i - 1)
        if di >= half:
            break
        d.append(di)
        i += 1
    return np.asarray(d[::-1])


def build_mesh(level: int, collar_gap: float | None = None, collar_ratio: float = 1.25) -> DiscMesh:
    """Polar mesh; ``collar_gap`` adds geometrically graded rings at the boundary."""
    if level < 0:
        raise ValueError("level must be >= 0")
    M = 2**level
    collar = collar_distances(level, collar_gap, collar_ratio)
    verts = [np.zeros((1, 2))]
    starts = [0, 1]
    for j in range(1, M + 1):
        n = 6 * j
        th = 2 * np.pi * np.arange(n) / n
        rad = j / M
        if collar.size and j == M:
            rad = 1.0 - 0.5 / M
        verts.append(np.column_stack([np.cos(th), np.sin(th)]) * rad)
        starts.append(starts[-1] + n)
    nM = 6 * M
    thM = 2 * np.pi * np.arange(nM) / nM
    for d in list(collar) + ([0.0] if collar.size else []):
        verts.append(np.column_stack([np.cos(thM), np.sin(thM)]) * (1.0 - d))
        starts.append(starts[-1] + nM)
    V = np.concatenate(verts)
    bl = np.arange(starts[-2], starts[-1])
    # snap boundary exactly to the unit circle
    V[bl] /= np.linalg.norm(V[bl], axis=1, keepdims=True)
    tris = []
    for j in range(1, M + 1):
        outer = np.arange(starts[j], starts[j + 1])
        n = outer.size
        if j == 1:
            for o in range(n):
                tris.append((0, outer[o], outer[(o + 1) % n]))
            continue
        inner = np.arange(starts[j - 1], starts[j])
        m = inner.size
        i = o = 0
        while i < m or o < n:
            ai = (i + 1) / m
            ao = (o + 1) / n
            if o < n and (i >= m or ao <= ai):
                tris.append((inner[i % m], outer[o], outer[(o + 1) % n]))
                o += 1
            else:
                tris.append((inner[i % m], outer[o % n], inner[(i + 1) % m]))
                i += 1
    for j in range(M, len(starts) - 2):
        inner = np.arange(starts[j], starts[j + 1])
        outer = np.arange(starts[j + 1], starts[j + 2])
        for k in range(nM):
            k1 = (k + 1) % nM
            # alternate the quad diagonals to avoid a rotational bias
            if (k + j) % 2 == 0:
                tris += [(inner[k], outer[k], outer[k1]), (inner[k], outer[k1], inner[k1])]
            else:
                tris += [(inner[k], outer[k], inner[k1]), (inner[k1], outer[k], outer[k1])]
    return DiscMesh(vertices=V, triangles=np.asarray(tris, dtype=np.int64), boundary_loop=bl,
                    level=level, ring_start=np.asarray(starts, dtype=np.int64),
                    collar=tuple(float(d) for d in collar))


class MeshLocator:
    """Barycentric point location in a planar triangulation.

    Points outside the triangulation (for instance between a boundary chord
    and the unit circle) are assigned to the nearest candidate triangle
    with clamped, renormalised barycentric coordinates.
    """

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray, k: int = 12):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles)
        P = self.vertices[self.triangles]
        self._tree = cKDTree(P.mean(axis=1))
        self._P = P
        e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self._inv = np.stack([np.stack([e2[:, 1], -e2[:, 0]], -1),
                              np.stack([-e1[:, 1], e1[:, 0]], -1)], 1) / det[:, None, None]
        self.k = min(k, len(self.triangles))

    def barycentric(self, tri_idx: np.ndarray, z: np.ndarray) -> np.ndarray:
        st = np.einsum("nij,nj->ni", self._inv[tri_idx], z - self._P[tri_idx, 0])
        return np.column_stack([1 - st.sum(1), st])

    def locate(self, z) -> tuple[np.ndarray, np.ndarray]:
        z = np.atleast_2d(np.asarray(z, dtype=float))
        _, cand = self._tree.query(z, k=self.k)
        cand = np.atleast_2d(cand)
        best = np.full(len(z), -1)
        best_score = np.full(len(z), -np.inf)
        for c in range(cand.shape[1]):
            idx = cand[:, c]
            lam = self.barycentric(idx, z)
            score = lam.min(axis=1)
            upd = score > best_score + 1e-15
            best[upd] = idx[upd]
            best_score[upd] = score[upd]
        lam = self.barycentric(best, z)
        if np.any(best_score < -1e-12):
            lam = np.clip(lam, 0.0, None)
            lam /= lam.sum(axis=1, keepdims=True)
        return best, lam

    def interpolate(self, values: np.ndarray, z) -> np.ndarray:
        """Piecewise-linear interpolation of per-vertex ``values``."""
        tri, lam = self.locate(z)
        return np.einsum("nk,nkd->nd", lam, values[self.triangles[tri]])


def _point_triangle_distance(c: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Euclidean distance from point c to each triangle (T, 3, d)."""
    p0 = tri[:, 0]
    e1 = tri[:, 1] - p0
    e2 = tri[:, 2] - p0
    w = c[None] - p0
    a = np.einsum("ij,ij->i", e1, e1)
    b = np.einsum("ij,ij->i", e1, e2)
    cc = np.einsum("ij,ij->i", e2, e2)
    d = np.einsum("ij,ij->i", e1, w)
    e = np.einsum("ij,ij->i", e2, w)
    det = a * cc - b * b
    det = np.where(det > 0, det, 1.0)
    s = (cc * d - b * e) / det
    t = (a * e - b * d) / det
    inside = (s >= 0) & (t >= 0) & (s + t <= 1)
    proj = p0 + s[:, None] * e1 + t[:, None] * e2
    dist = np.where(inside, np.linalg.norm(c[None] - proj, axis=1), np.inf)
    for u, v in ((0, 1), (1, 2), (2, 0)):
        A, Bv = tri[:, u], tri[:, v]
        seg = Bv - A
        L2 = np.einsum("ij,ij->i", seg, seg)
        tt = np.clip(np.einsum("ij,ij->i", c[None] - A, seg) / np.where(L2 > 0, L2, 1.0), 0, 1)
        q = A + tt[:, None] * seg
        dist = np.minimum(dist, np.linalg.norm(c[None] - q, axis=1))
    return dist


_SUB = np.array([
    [[1, 0, 0], [.5, .5, 0], [.5, 0, .5]],
    [[.5, .5, 0], [0, 1, 0], [0, .5, .5]],
    [[.5, 0, .5], [0, .5, .5], [0, 0, 1]],
    [[.5, .5, 0], [0, .5, .5], [.5, 0, .5]],
])


def clip_triangles(tri: np.ndarray, center, radius: float, depth: int = 8):
    """Pieces of triangles inside the closed ball |x - center| <= radius.

    Returns ``(parent, bary)``: parent triangle index of each piece and the
    barycentric coordinates (K, 3, 3) of its corners in the parent.
    Triangles crossing the sphere are subdivided adaptively; at ``depth``
    a piece counts when its barycentre is inside.
    """
    tri = np.asarray(tri, dtype=float)
    c = np.asarray(center, dtype=float)
    T = len(tri)
    eye = np.broadcast_to(np.eye(3), (T, 3, 3))
    parent = np.arange(T)
    bary = eye.copy()
    out_p, out_b = [], []
    for level in range(depth + 1):
        if parent.size == 0:
            break
        pts = np.einsum("kvj,kjd->kvd", bary, tri[parent])
        r = np.linalg.norm(pts - c, axis=2)
        inside = np.all(r <= radius, axis=1)
        out_p.append(parent[inside])
        out_b.append(bary[inside])
        rest = ~inside
        if not np.any(rest):
            parent = parent[:0]
            break
        parent, bary, pts = parent[rest], bary[rest], pts[rest]
        far = _point_triangle_distance(c, pts) > radius
        parent, bary = parent[~far], bary[~far]
        if level == depth:
            cen = np.einsum("kvj,kjd->kd", bary / 3.0, tri[parent])
            keep = np.linalg.norm(cen - c, axis=1) <= radius
            out_p.append(parent[keep])
            out_b.append(bary[keep])
            break
        # split each crossing piece into 4
        bary = np.einsum("svw,kwj->ksvj", _SUB, bary).reshape(-1, 3, 3)
        parent = np.repeat(parent, 4)
    if out_p:
        return np.concatenate(out_p), np.concatenate(out_b)
    return np.zeros(0, int), np.zeros((0, 3, 3))


def _arc_points(z0: complex, r: float, n: int):
    """Points of D-bar ∩ ∂D_r(z0) in angular order; ``closed`` if a full circle."""
    m = abs(z0)
    if m + r <= 1.0:
        phi = 2 * np.pi * np.arange(n) / n
        return z0 + r * np.exp(1j * phi), True
    if m - r >= 1.0 or r - m >= 1.0:
        return np.zeros(0, complex), False
    c = (1.0 - m * m - r * r) / (2 * r * m)
    c = min(1.0, max(-1.0, c))
    w = math.acos(c)
    psi = math.atan2(z0.imag, z0.real)
    phi = psi + np.linspace(w, 2 * np.pi - w, n)
    pts = z0 + r * np.exp(1j * phi)
    # snap the arc endpoints onto the unit circle
    pts[[0, -1]] /= np.abs(pts[[0, -1]])
    return pts, False


def _polyline_length(X: np.ndarray, metric, closed: bool, euclidean: bool) -> float:
    if closed:
        X = np.concatenate([X, X[:1]])
    d = np.diff(X, axis=0)
    if euclidean or metric is None:
        return float(np.sum(np.linalg.norm(d, axis=1)))
    mid = 0.5 * (X[1:] + X[:-1])
    G = metric.tensor(mid)
    return float(np.sum(np.sqrt(np.einsum("ni,nij,nj->n", d, G, d))))


def courant_lebesgue_radius(disc_map, z0, s: float, n_radii: int = 48,
                            euclidean: bool = True, samples_per_h: int = 4) -> dict:
    """Radius in (s, sqrt(s)) whose image arc D ∩ ∂D_r(z0) is shortest.

    Lengths are Euclidean by default (``euclidean=False`` measures in the
    ambient metric); the energy entering the bound
    sqrt(8 pi E(u | D_sqrt(s)(z0)) / -ln s) is measured consistently.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    mesh = disc_map.mesh
    h = mesh.h
    width = math.sqrt(s) - s
    if width < h:
        # smallest s whose annulus (s, sqrt s) is at least one mesh cell wide
        lo_s, hi_s = 1e-12, 0.25
        for _ in range(100):
            mid = 0.5 * (lo_s + hi_s)
            if math.sqrt(mid) - mid >= h:
                hi_s = mid
            else:
                lo_s = mid
        raise ValueError(f"annulus (s, sqrt s) contains no mesh edges at level {mesh.level}; "
                         f"use s >= {hi_s:.4g}")
    z0 = complex(*np.asarray(z0, dtype=float)) if not isinstance(z0, complex) else z0
    radii = np.linspace(s, math.sqrt(s), n_radii + 2)[1:-1]
    loc = mesh.locator
    best = None
    table = []
    for r in radii:
        n = max(64, int(math.ceil(2 * math.pi * r / h * samples_per_h)))
        pts, closed = _arc_points(z0, r, n)
        if pts.size == 0:
            continue
        Z = np.column_stack([pts.real, pts.imag])
        X = loc.interpolate(disc_map.positions, Z)
        L = _polyline_length(X, disc_map.metric, closed, euclidean)
        table.append((float(r), L))
        if best is None or L < best[1]:
            best = (float(r), L)
    E = disc_energy_in_disc(disc_map, (z0.real, z0.imag), math.sqrt(s), euclidean=euclidean)
    bound = math.sqrt(8 * math.pi * E / -math.log(s))
    return {"r": best[0], "arc_length": best[1], "energy": E, "bound": bound,
            "s": s, "z0": (z0.real, z0.imag), "table": table}


def disc_energy_in_disc(disc_map, center, radius: float, euclidean: bool = True) -> float:
    """Dirichlet energy of the map over D ∩ D_radius(center)."""
    from .plateau import subdisc_energy
    return subdisc_energy(disc_map, center, radius, euclidean=euclidean)


def disc_automorphism(a: complex):
    """z -> (z + a) / (1 + conj(a) z), sending 0 to a (|a| < 1)."""
    if abs(a) >= 1:
        raise ValueError("automorphism centre must lie inside the disc")

    def fwd(z):
        return (z + a) / (1 + np.conj(a) * z)

    def inv(w):
        return (w - a) / (1 - np.conj(a) * w)

    return fwd, inv


def circle_intersection_angle(r1: float, r2: float, d: float) -> float:
    """Angle between two circles at an intersection point (between their radii)."""
    c = (r1 * r1 + r2 * r2 - d * d) / (2 * r1 * r2)
    if abs(c) > 1:
        raise ValueError("circles do not intersect")
    return math.acos(c)


@dataclass(frozen=True)
class LuneMap:
    """Conformal map of D onto the lune D ∩ D_r(-1) and its inverse.

    Chain (lune -> disc): Mobius w = (z - p)/(z - q) sends the corners to
    0 and infinity and the lune to a wedge of opening ``alpha``; a rotation
    and the power w**(pi/alpha) open the wedge to the upper half-plane;
    the Cayley map (w - i)/(w + i) closes it to D.  Disc points 1 and -1
    correspond to the corners q and p.
    """

    r: float
    p: complex
    q: complex
    alpha: float
    rot: complex
    corner_guard: float = 1e-4

    @property
    def exponent(self) -> float:
        return math.pi / self.alpha

    def inverse(self, z, clamp: bool = False):
        """Lune -> disc."""
        z = np.asarray(z, dtype=complex)
        near = (np.abs(z - self.p) < self.corner_guard) | (np.abs(z - self.q) < self.corner_guard)
        if np.any(near) and not clamp:
            raise ValueError("evaluation within the corner guard of the lune")
        w = (z - self.p) / (z - self.q) * self.rot
        ang = np.mod(np.angle(w), 2 * np.pi)
        ang = np.where(ang > np.pi + self.alpha / 2 + 1e-12, ang - 2 * np.pi, ang)
        mag = np.abs(w) ** self.exponent
        zeta = mag * np.exp(1j * ang * self.exponent)
        out = (zeta - 1j) / (zeta + 1j)
        if np.any(near):
            out = np.where(np.abs(z - self.p) < self.corner_guard, -1.0 + 0j, out)
            out = np.where(np.abs(z - self.q) < self.corner_guard, 1.0 + 0j, out)
        return out

    def forward(self, zeta):
        """Disc -> lune."""
        zeta = np.asarray(zeta, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            uhp = 1j * (1 + zeta) / (1 - zeta)
            ang = np.angle(uhp)
            # the negative real axis may come back as -pi
            ang = np.clip(np.where(ang < -0.5 * np.pi, ang + 2 * np.pi, ang), 0.0, np.pi)
            w = np.abs(uhp) ** (1.0 / self.exponent) * np.exp(1j * ang / self.exponent)
            w = w / self.rot
            z = (self.q * w - self.p) / (w - 1)
        z = np.where(np.isclose(zeta, 1.0, atol=1e-15), self.q, z)
        z = np.where(np.isclose(zeta, -1.0, atol=1e-15), self.p, z)
        return z

    def on_boundary_residual(self, z) -> np.ndarray:
        """Distance of lune points to the nearer defining circle."""
        z = np.asarray(z, dtype=complex)
        return np.minimum(np.abs(np.abs(z) - 1.0), np.abs(np.abs(z + 1.0) - self.r))


def lune_to_disc(r: float) -> LuneMap:
    """Conformal equivalence between D and D ∩ D_r(-1), 0 < r < 1."""
    if not 0 < r < 1:
        raise ValueError("need 0 < r < 1 so that D ∩ D_r(-1) is a lune")
    x = r * r / 2 - 1
    y = math.sqrt(1 - x * x)
    p, q = complex(x, -y), complex(x, y)
    # interior angle of the lune = pi - angle between the radii at a corner
    alpha = math.pi - circle_intersection_angle(1.0, r, 1.0)

    def mob(z):
        return (z - p) / (z - q)

    phi_a = np.angle(mob(-1.0 + 0j))  # image of the unit-circle arc
    phi_b = np.angle(mob(-1.0 + r + 0j))  # image of the small-circle arc
    mid = np.angle(mob(-1.0 + r / 2 + 0j))
    start = None
    for cand in (phi_a, phi_b):
        if np.mod(mid - cand, 2 * np.pi) < alpha:
            start = cand
    if start is None:
        raise RuntimeError("could not orient the lune wedge")
    rot = complex(np.exp(-1j * start))
    return LuneMap(r=r, p=p, q=q, alpha=alpha, rot=rot)
