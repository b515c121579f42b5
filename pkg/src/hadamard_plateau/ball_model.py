"""Conformal unit-ball coordinates for a rotationally symmetric model.

A point at geodesic distance r from the origin in direction theta sits at
Euclidean position g(r) * theta, where

    g(r) = exp(-int_r^inf dt / F(t)),

and the metric becomes f'(|x|)^2 dx^2 with f the inverse of g.  The
integral is split as ln(r / s_max) - (B(s_max) - B(r)) - T with
B = int_0^s (1/F - 1/t) from the comparison solution and T the tail beyond
s_max, which is bracketed by the cosh comparison bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .comparison_ode import ComparisonSolution

__all__ = ["BallModel", "build_ball_model", "conformal_factor", "check_polar_identity",
           "exp_point", "DEFAULT_MARGIN"]

DEFAULT_MARGIN = 1e-6


@dataclass(frozen=True)
class BallModel:
    sol: ComparisonSolution
    tail: float  # midpoint estimate of int_{s_max}^inf dt/F
    tail_bound: float  # width of the certified bracket [0, 2*tail]
    log_c: float  # ln g'(0)
    margin: float = DEFAULT_MARGIN

    @property
    def s_max(self) -> float:
        return self.sol.s_max

    @property
    def a(self) -> float:
        return self.sol.profile.a

    # radius transfer --------------------------------------------------
    def g(self, r):
        """Euclidean radius of the geodesic sphere of radius r."""
        r = np.asarray(r, dtype=float)
        return r * np.exp(self.log_c + self.sol.B_at(r))

    def gprime(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        pos = r > 0
        out[pos] = self.g(r[pos]) / self.sol.F_at(r[pos])
        out[~pos] = math.exp(self.log_c)
        return out

    @property
    def t_max(self) -> float:
        """Largest Euclidean radius representable on the solved range."""
        return float(self.g(self.s_max))

    def f(self, t):
        """Inverse of g: geodesic radius of the Euclidean radius t."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any(t < 0) or np.any(t >= 1.0):
            raise ValueError("f is defined on [0, 1)")
        if np.any(t > self.t_max):
            raise ValueError(
                f"Euclidean radius {float(t.max()):.12g} beyond solved range g(s_max) = {self.t_max:.12g}")
        out = self._invert(t)
        return out[0] if scalar else out

    def _invert(self, t: np.ndarray) -> np.ndarray:
        grid = self.sol.grid
        gnodes = self._g_nodes
        idx = np.clip(np.searchsorted(gnodes, t, side="right") - 1, 0, grid.size - 2)
        lo, hi = grid[idx], grid[idx + 1]
        glo, ghi = gnodes[idx], gnodes[idx + 1]
        w = np.where(ghi > glo, (t - glo) / np.where(ghi > glo, ghi - glo, 1.0), 0.0)
        r = lo + w * (hi - lo)
        # Newton on ln g(r) = ln t; d ln g / dr = 1/F
        pos = t > 0
        rp, tp, lop, hip = r[pos], t[pos], lo[pos], hi[pos]
        lt = np.log(tp)
        for _ in range(8):
            rp = np.clip(rp, np.maximum(lop, 1e-300), hip)
            step = (np.log(rp) + self.log_c + self.sol.B_at(rp) - lt) * self.sol.F_at(rp)
            rp = rp - step
            if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(rp))):
                break
        r[pos] = np.clip(rp, lop, hip)
        r[~pos] = 0.0
        return r

    def fprime(self, t):
        """Conformal factor f'(t) = F(f(t)) / t, with f'(0) = 1/g'(0)."""
        t = np.asarray(t, dtype=float)
        self._check_margin(t)
        return self._fprime_unchecked(t)

    def _fprime_unchecked(self, t):
        t = np.asarray(t, dtype=float)
        r = self.f(t)
        out = np.empty_like(np.atleast_1d(t))
        tt, rr = np.atleast_1d(t), np.atleast_1d(r)
        pos = tt > 1e-8
        out[pos] = self.sol.F_at(rr[pos]) / tt[pos]
        # near 0: F(r)/g(r) = 1/g'(0) * (1 + O(r^2)); exact derivative limit
        out[~pos] = math.exp(-self.log_c)
        return out[0] if t.ndim == 0 else out

    def fsecond(self, t):
        """f''(t) = ((F' - 1) F / g^2) evaluated at f(t)."""
        t = np.asarray(t, dtype=float)
        self._check_margin(t)
        tt = np.atleast_1d(t)
        rr = np.atleast_1d(self.f(tt))
        out = np.zeros_like(tt)
        pos = tt > 1e-8
        F = self.sol.F_at(rr[pos])
        Fp = self.sol.Fprime_at(rr[pos])
        out[pos] = (Fp - 1.0) * F / tt[pos] ** 2
        # small t: (F'-1)F/g^2 ~ (-k0 r^2/2) r / (c r)^2 -> 0 linearly
        return out[0] if t.ndim == 0 else out

    def factor_and_derivative(self, t):
        """(f'(t), f''(t)) sharing one inversion; no margin check."""
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        rr = self.f(tt)
        lam = np.full_like(tt, math.exp(-self.log_c))
        dlam = np.zeros_like(tt)
        pos = tt > 1e-8
        F = self.sol.F_at(rr[pos])
        Fp = self.sol.Fprime_at(rr[pos])
        lam[pos] = F / tt[pos]
        dlam[pos] = (Fp - 1.0) * F / tt[pos] ** 2
        return lam, dlam

    def _check_margin(self, t):
        if np.any(np.asarray(t) >= 1.0 - self.margin):
            raise ValueError(f"Euclidean radius within margin {self.margin:g} of the ideal boundary")

    # export -----------------------------------------------------------
    def table(self, n: int = 201, r_max: float | None = None) -> np.ndarray:
        """Rows (r, g(r), f'(g(r))) on a uniform radius grid."""
        r_max = self.s_max if r_max is None else r_max
        r = np.linspace(0.0, r_max, n)
        g = self.g(r)
        keep = g < 1.0 - self.margin
        r, g = r[keep], g[keep]
        return np.column_stack([r, g, self._fprime_unchecked(g)])

    def to_csv(self, path, n: int = 201, r_max: float | None = None) -> None:
        np.savetxt(path, self.table(n, r_max), delimiter=",", header="r,g,fprime",
                   comments="", fmt="%.17g")


def build_ball_model(sol: ComparisonSolution, tail_tol: float = 1e-9,
                     margin: float = DEFAULT_MARGIN) -> BallModel:
    """Ball-model transfer functions from a comparison solution.

    For t >= s_max the solution obeys F(t) >= F(s_max) cosh(alpha (t - s_max))
    with alpha^2 the curvature bound valid beyond s_max, so the tail of
    int dt/F lies in [0, pi / (2 alpha F(s_max))].  The midpoint is used and
    the full bracket width is reported as ``tail_bound``.
    """
    prof = sol.profile
    if prof.a <= 0:
        raise ValueError("ball model needs a declared uniform bound k <= -a^2 with a > 0")
    s_max = sol.s_max
    if prof.monotone_nonincreasing:
        alpha = math.sqrt(-float(prof(s_max)))
    else:
        alpha = prof.a
    F_end = float(sol.F[-1])
    T_hi = math.pi / (2.0 * alpha * F_end)
    if T_hi > tail_tol:
        raise ValueError(
            f"tail bracket width {T_hi:.3g} exceeds tolerance {tail_tol:.3g}; raise s_max (now {s_max:g})")
    tail = 0.5 * T_hi
    log_c = -math.log(s_max) - float(sol.B[-1]) - tail
    model = BallModel(sol=sol, tail=tail, tail_bound=T_hi, log_c=log_c, margin=margin)
    object.__setattr__(model, "_g_nodes", np.asarray(model.g(sol.grid)))
    return model


def conformal_factor(model: BallModel, t):
    """f'(t), refused within ``model.margin`` of the unit sphere."""
    return model.fprime(t)


def exp_point(model: BallModel, direction, r: float) -> np.ndarray:
    """Model coordinates of Exp(r * direction) from the centre."""
    d = np.asarray(direction, dtype=float)
    if not math.isclose(float(np.linalg.norm(d)), 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError("direction must be a unit vector")
    if r < 0:
        raise ValueError("r must be >= 0")
    return float(model.g(r)) * d


def check_polar_identity(model: BallModel, samples: int = 64, seed: int = 0,
                         h: float = 1e-5, r_max: float | None = None) -> dict:
    """Compare f'(|x|)^2 dx^2 against dr^2 + F(r)^2 dtheta^2.

    Tangents of x(r, theta) = g(r) (cos theta, sin theta) are taken by
    central differences in r and theta; the conformal lengths should be
    1 and F(r) respectively.
    """
    rng = np.random.default_rng(seed)
    if r_max is None:
        r_max = 0.8 * model.s_max
        while model.g(r_max) >= 1 - 1e-4:
            r_max *= 0.8
    r = rng.uniform(2 * h, r_max, samples)
    th = rng.uniform(0.0, 2 * np.pi, samples)

    def x(rr, tt):
        gg = model.g(rr)
        return np.stack([gg * np.cos(tt), gg * np.sin(tt)], axis=-1)

    lam = model.fprime(model.g(r))
    d_r = (x(r + h, th) - x(r - h, th)) / (2 * h)
    d_th = (x(r, th + h) - x(r, th - h)) / (2 * h)
    radial = lam * np.linalg.norm(d_r, axis=-1)
    angular = lam * np.linalg.norm(d_th, axis=-1)
    F = model.sol.F_at(r)
    err_r = np.abs(radial - 1.0)
    err_a = np.abs(angular - F) / F
    return {
        "max_rel_err": float(max(err_r.max(), err_a.max())),
        "max_radial_err": float(err_r.max()),
        "max_angular_rel_err": float(err_a.max()),
        "samples": samples,
    }
