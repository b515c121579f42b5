"""Radial comparison functions: F'' + k F = 0, F(0) = 0, F'(0) = 1.

`solve_comparison` integrates the comparison problem for a radial curvature
profile together with G = int_0^s F and the regularised integral
B = int_0^s (1/F - 1/t) dt that the ball model needs.  The ``check_*``
functions turn the growth, monotonicity and two-profile ratio properties of
F into numeric reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline

__all__ = [
    "CurvatureProfile",
    "ComparisonSolution",
    "SolverError",
    "solve_comparison",
    "check_growth_ratios",
    "check_G_over_sF",
    "ratio_constant_C",
    "check_ratio_bound",
    "ode_residual",
    "CLOSED_FORMS",
]

# below this radius 1/F - 1/s is evaluated from its Taylor expansion
_SERIES_SWITCH = 1e-3


class SolverError(RuntimeError):
    """Raised when the comparison integrator cannot reach ``s_max``."""

    def __init__(self, message: str, last_s: float):
        super().__init__(f"{message} (last good s = {last_s:.6g})")
        self.last_s = last_s


def _closed_linear(params):
    k0 = float(params.get("k0", -1.0))
    slope = float(params.get("slope", 1.0))
    return lambda s: k0 - slope * np.asarray(s, dtype=float)


def _closed_exp_perturbed(params):
    k0 = float(params.get("k0", -1.0))
    amp = float(params.get("amp", 1.0))
    rate = float(params.get("rate", 1.0))
    return lambda s: k0 - amp * np.exp(-rate * np.asarray(s, dtype=float))


def _closed_quadratic(params):
    k0 = float(params.get("k0", -1.0))
    c = float(params.get("c", 1.0))
    return lambda s: k0 - c * np.asarray(s, dtype=float) ** 2


# id -> (factory(params) -> k(s), non-increasing when params are "natural")
CLOSED_FORMS: dict[str, Callable] = {
    "linear": _closed_linear,  # k0 - slope*s
    "exp-perturbed": _closed_exp_perturbed,  # k0 - amp*exp(-rate*s)
    "quadratic": _closed_quadratic,  # k0 - c*s^2
}


@dataclass(frozen=True)
class CurvatureProfile:
    """Radial curvature k(s) <= 0 of a rotationally symmetric model.

    Exactly one of the three kinds is populated:

    * ``kind="constant"``: ``value`` holds the constant curvature;
    * ``kind="samples"``: ``grid``/``values`` are linearly interpolated and
      held constant beyond the last node;
    * ``kind="closed-form"``: ``form_id`` names an entry of
      :data:`CLOSED_FORMS`, configured by ``params``.

    ``a`` is the declared uniform bound k <= -a^2 (0 means none declared).
    """

    kind: str
    value: float = 0.0
    grid: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    form_id: str = ""
    params: tuple[tuple[str, float], ...] = ()
    a: float = 0.0
    monotone_nonincreasing: bool = False
    _fn: Callable = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.kind == "constant":
            v = float(self.value)
            fn = lambda s: np.full(np.shape(s), v, dtype=float)  # noqa: E731
        elif self.kind == "samples":
            grid = np.asarray(self.grid, dtype=float)
            vals = np.asarray(self.values, dtype=float)
            if grid.ndim != 1 or grid.size < 2 or grid.size != vals.size:
                raise ValueError("sampled profile needs matching grid/values of length >= 2")
            if np.any(np.diff(grid) <= 0) or grid[0] != 0.0:
                raise ValueError("profile grid must start at 0 and be strictly increasing")
            fn = lambda s: np.interp(s, grid, vals)  # noqa: E731
        elif self.kind == "closed-form":
            if self.form_id not in CLOSED_FORMS:
                raise ValueError(f"unknown closed-form profile id {self.form_id!r}")
            fn = CLOSED_FORMS[self.form_id](dict(self.params))
        else:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        object.__setattr__(self, "_fn", fn)
        if self.a < 0:
            raise ValueError("declared bound a must be >= 0")

    # constructors -----------------------------------------------------
    @classmethod
    def constant(cls, value: float, a: float | None = None) -> "CurvatureProfile":
        if a is None:
            a = math.sqrt(-value) if value < 0 else 0.0
        return cls(kind="constant", value=float(value), a=float(a), monotone_nonincreasing=True)

    @classmethod
    def samples(cls, grid, values, a: float = 0.0, monotone_nonincreasing: bool | None = None):
        grid = tuple(float(x) for x in grid)
        values = tuple(float(x) for x in values)
        if monotone_nonincreasing is None:
            monotone_nonincreasing = bool(np.all(np.diff(values) <= 0))
        return cls(kind="samples", grid=grid, values=values, a=float(a),
                   monotone_nonincreasing=monotone_nonincreasing)

    @classmethod
    def closed_form(cls, form_id: str, params: dict | None = None, a: float = 0.0,
                    monotone_nonincreasing: bool = True) -> "CurvatureProfile":
        items = tuple(sorted((str(k), float(v)) for k, v in (params or {}).items()))
        return cls(kind="closed-form", form_id=form_id, params=items, a=float(a),
                   monotone_nonincreasing=monotone_nonincreasing)

    # evaluation ---------------------------------------------------------
    def __call__(self, s):
        return self._fn(s)

    def breakpoints(self, s_max: float) -> np.ndarray:
        """Nodes in [0, s_max] where k may fail to be smooth."""
        pts = [0.0, float(s_max)]
        if self.kind == "samples":
            pts.extend(x for x in self.grid if 0.0 < x < s_max)
        return np.unique(np.asarray(pts))

    def validate(self, s_max: float, n: int = 2001) -> np.ndarray:
        """Check sign, declared bound and monotonicity on a probe grid.

        Returns the probe grid; raises ``ValueError`` on violation.
        """
        s = np.unique(np.concatenate([np.linspace(0.0, s_max, n), self.breakpoints(s_max)]))
        k = np.asarray(self(s), dtype=float)
        if np.any(~np.isfinite(k)):
            raise ValueError("curvature profile produced non-finite values")
        if np.any(k > 0):
            i = int(np.argmax(k > 0))
            raise ValueError(f"positive curvature sample k({s[i]:.6g}) = {k[i]:.6g}")
        if self.a > 0 and np.any(k > -self.a**2 * (1 - 1e-12)):
            i = int(np.argmax(k > -self.a**2 * (1 - 1e-12)))
            raise ValueError(
                f"declared bound k <= -a^2 = {-self.a**2:.6g} violated at s = {s[i]:.6g} (k = {k[i]:.6g})")
        if self.monotone_nonincreasing and np.any(np.diff(k) > 1e-12 * np.maximum(1.0, np.abs(k[1:]))):
            raise ValueError("profile flagged non-increasing but increases on the probe grid")
        return s

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "a": self.a, "monotone_nonincreasing": self.monotone_nonincreasing}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "samples":
            d["grid"] = list(self.grid)
            d["values"] = list(self.values)
        else:
            d["id"] = self.form_id
            d["params"] = dict(self.params)
        return d


@dataclass(frozen=True)
class ComparisonSolution:
    """Sampled solution of the comparison problem on ``[0, s_max]``.

    ``B`` is the cumulative integral of ``1/F - 1/t``; it stays bounded at
    the origin where ``1/F`` itself does not.
    """

    grid: np.ndarray
    F: np.ndarray
    Fprime: np.ndarray
    G: np.ndarray
    B: np.ndarray
    profile: CurvatureProfile
    tol: float

    @property
    def s_max(self) -> float:
        return float(self.grid[-1])

    def __post_init__(self):
        k = np.asarray(self.profile(self.grid), dtype=float)
        Fpp = -k * self.F
        splines = {
            "F": CubicHermiteSpline(self.grid, self.F, self.Fprime),
            "Fprime": CubicHermiteSpline(self.grid, self.Fprime, Fpp),
            "G": CubicHermiteSpline(self.grid, self.G, self.F),
            "B": CubicHermiteSpline(self.grid, self.B, _reg_inverse(self.grid, self.F, k)),
        }
        object.__setattr__(self, "_splines", splines)

    def _eval(self, name, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > self.s_max * (1 + 1e-12)):
            raise ValueError(f"s outside solved range [0, {self.s_max:.6g}]")
        return self._splines[name](s)

    def F_at(self, s):
        return self._eval("F", s)

    def Fprime_at(self, s):
        return self._eval("Fprime", s)

    def G_at(self, s):
        return self._eval("G", s)

    def B_at(self, s):
        return self._eval("B", s)

    def k_at(self, s):
        return np.asarray(self.profile(s), dtype=float)

    def to_csv(self, path) -> None:
        """Write columns ``s, F, Fprime, G``."""
        data = np.column_stack([self.grid, self.F, self.Fprime, self.G])
        np.savetxt(path, data, delimiter=",", header="s,F,Fprime,G", comments="", fmt="%.17g")


def _reg_inverse(s, F, k):
    """1/F - 1/s, switching to its Taylor series near the origin."""
    s = np.asarray(s, dtype=float)
    F = np.asarray(F, dtype=float)
    k = np.asarray(k, dtype=float)
    out = np.empty_like(s)
    small = s < _SERIES_SWITCH
    ss, kk = s[small], k[small]
    # F = s - k s^3/6 + k^2 s^5/120 + ...  =>  1/F - 1/s = k s/6 + 7 k^2 s^3/360 + ...
    out[small] = kk * ss / 6.0 + 7.0 * kk**2 * ss**3 / 360.0
    big = ~small
    out[big] = (s[big] - F[big]) / (s[big] * F[big])
    return out


def solve_comparison(profile: CurvatureProfile, s_max: float, tol: float = 1e-10,
                     max_spacing: float | None = None) -> ComparisonSolution:
    """Integrate F'' + kF = 0 with F(0)=0, F'(0)=1 on ``[0, s_max]``.

    Uses the adaptive DOP853 pair (order 8 with order 5/3 error control) on
    the state (F, F', G, B); G and B are therefore integrated at the same
    order as F.  The stored grid is the union of accepted steps and a
    uniform fill of spacing ``max_spacing`` taken from the dense output.
    """
    if not s_max > 0:
        raise ValueError("s_max must be positive")
    if not (0 < tol <= 1e-4):
        raise ValueError("tol must lie in (0, 1e-4]")
    probe = profile.validate(s_max)
    kmax = float(np.max(np.abs(profile(probe)))) if probe.size else 0.0

    def rhs(s, y):
        F, Fp = y[0], y[1]
        k = float(profile(s))
        sa = np.array([s])
        b = _reg_inverse(sa, np.array([F]), np.array([k]))[0]
        return [Fp, -k * F, F, b]

    breaks = profile.breakpoints(s_max)
    # the midpoint residual differentiates sampled data, so integrate well below tol
    rtol = max(tol * 1e-3, 1e-13)
    y0 = np.array([0.0, 1.0, 0.0, 0.0])
    ts, ys, dense = [], [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        res = solve_ivp(rhs, (lo, hi), y0, method="DOP853", rtol=rtol, atol=rtol * 1e-3,
                        dense_output=True)
        if res.status != 0:
            last = float(res.t[-1]) if res.t.size else float(lo)
            raise SolverError(f"comparison integration failed: {res.message}", last)
        ts.append(res.t)
        ys.append(res.y)
        dense.append((lo, hi, res.sol))
        y0 = res.y[:, -1]

    if max_spacing is None:
        # cubic Hermite interpolation error ~ h^4; keep it near tol
        max_spacing = min(0.05, 0.25 * tol**0.25 / math.sqrt(max(1.0, kmax)))
    n_fill = int(math.ceil(s_max / max_spacing)) + 1
    fill = np.linspace(0.0, s_max, n_fill)
    grid = np.unique(np.concatenate([np.concatenate(ts), fill]))
    Y = np.empty((4, grid.size))
    for lo, hi, sol in dense:
        sel = (grid >= lo) & (grid <= hi)
        Y[:, sel] = sol(grid[sel])
    Y[:, 0] = [0.0, 1.0, 0.0, 0.0]
    if np.any(~np.isfinite(Y)):
        raise SolverError("non-finite comparison solution", float(grid[np.argmax(~np.isfinite(Y).any(0))]))
    return ComparisonSolution(grid=grid, F=Y[0], Fprime=Y[1], G=Y[2], B=Y[3], profile=profile, tol=tol)


def ode_residual(sol: ComparisonSolution) -> np.ndarray:
    """Relative residual |F'' + kF| / max(1, F) at all grid midpoints.

    F'' is the derivative of the Hermite interpolant of F' (which uses the
    exact nodal values -kF as slopes).
    """
    mid = 0.5 * (sol.grid[1:] + sol.grid[:-1])
    Fpp = sol._splines["Fprime"].derivative()(mid)
    F = sol.F_at(mid)
    return np.abs(Fpp + sol.k_at(mid) * F) / np.maximum(1.0, F)


def check_growth_ratios(sol: ComparisonSolution, tol: float = 1e-6) -> dict:
    """Minima of s F'/F and F'/F over the grid (s > 0).

    At s = 0 the limits are analytic: sF'/F -> 1 and F'/F -> +inf, so the
    origin is excluded.
    """
    s = sol.grid[1:]
    sFp_F = s * sol.Fprime[1:] / sol.F[1:]
    Fp_F = sol.Fprime[1:] / sol.F[1:]
    a = sol.profile.a
    rep = {
        "min_sFprime_over_F": float(np.min(sFp_F)),
        "min_Fprime_over_F": float(np.min(Fp_F)),
        "a": a,
        "tol": tol,
    }
    rep["efe_pass"] = rep["min_sFprime_over_F"] >= 1.0 - tol
    rep["a_pass"] = (a <= 0) or rep["min_Fprime_over_F"] >= a - tol
    rep["passed"] = bool(rep["efe_pass"] and rep["a_pass"])
    return rep


def check_G_over_sF(sol: ComparisonSolution, tol: float = 1e-6) -> dict:
    """Largest increase of G/(sF) between consecutive grid nodes."""
    if not sol.profile.monotone_nonincreasing:
        raise ValueError("G/(sF) monotonicity requires a non-increasing curvature profile")
    s = sol.grid[1:]
    ratio = sol.G[1:] / (s * sol.F[1:])
    ratio = np.concatenate([[0.5], ratio])
    viol = float(np.max(np.diff(ratio)))
    return {"max_violation": viol, "tol": tol, "passed": viol <= tol}


def _phi_integrand(k: CurvatureProfile, k0: CurvatureProfile):
    def phi(t):
        k0t = float(k0(t))
        return abs(float(k(t)) - k0t) / math.sqrt(-k0t)
    return phi


def ratio_constant_C(k: CurvatureProfile, k0: CurvatureProfile, s_max: float,
                     tail_bound: float = 0.0) -> float:
    """(pi/2) * int_0^s_max |k - k0| / sqrt(-k0) dt by adaptive quadrature.

    ``tail_bound`` is the caller's certified bound on the neglected
    integral over ``[s_max, inf)``; it is added to the result.
    """
    if tail_bound < 0:
        raise ValueError("tail_bound must be >= 0")
    probe = np.linspace(0.0, s_max, 2001)
    k0v = np.asarray(k0(probe), dtype=float)
    if np.any(k0v >= 0):
        raise ValueError("background curvature k0 must be strictly negative")
    if np.any(np.diff(k0v) > 1e-12 * np.maximum(1.0, np.abs(k0v[1:]))):
        raise ValueError("background curvature k0 must be non-increasing")
    phi = _phi_integrand(k, k0)
    nodes = np.unique(np.concatenate([k.breakpoints(s_max), k0.breakpoints(s_max)]))
    total = 0.0
    for lo, hi in zip(nodes[:-1], nodes[1:]):
        val, _ = quad(phi, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=400)
        total += val
    return 0.5 * math.pi * total + tail_bound


def check_ratio_bound(solF: ComparisonSolution, solF0: ComparisonSolution, C: float,
                      tol: float = 1e-6) -> dict:
    """max |ln(F/F0)| over solF's grid (s > 0) against the bound C.

    The result is flagged ``window_only`` when the integrand of C has not
    decayed at the end of the window, i.e. when C only covers the finite
    range actually solved.
    """
    s_hi = min(solF.s_max, solF0.s_max)
    s = solF.grid[(solF.grid > 0) & (solF.grid <= s_hi)]
    F = solF.F_at(s)
    F0 = solF0.F_at(s)
    logr = np.abs(np.log(F / F0))
    phi_end = _phi_integrand(solF.profile, solF0.profile)(s_hi)
    m = float(np.max(logr)) if logr.size else 0.0
    return {
        "max_log_ratio": m,
        "C": C,
        "tol": tol,
        "window_only": bool(phi_end > 1e-8),
        "passed": m <= C + tol,
    }
