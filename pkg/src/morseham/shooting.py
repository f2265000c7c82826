"""
Radial solutions of -(r^{N-1}u')' = r^{N-1}H_v, -(r^{N-1}v')' = r^{N-1}H_u by shooting.

The integrator works on the first-order system in (u, P, v, Q) with
P = r^{N-1}u', Q = r^{N-1}v'.  Solutions with m nodal zones are located by
root finding on the shooting parameters; see :func:`find_solution` for the
strategy used for each model/domain combination.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_bvp, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import ConsistencyError, DomainError, NotFoundError, SolverError
from .geometry import DomainSpec, refine, solution_grid
from .hamiltonian import HamiltonianModel, LaneEmden, SeparablePowers, model_from_dict

log = logging.getLogger(__name__)

TAYLOR_START = 1e-6  # start radius on a ball, relative to R
BLOWUP_CAP = 1e8
MAX_NODAL_ZONES = 6


# ----------------------------------------------------------------------------
# Initial value problem


@dataclass
class Trajectory:
    """Dense solution of the radial initial value problem."""

    N: int
    model: HamiltonianModel
    r0: float
    r_end: float
    alpha: float
    beta: float
    is_ball: bool
    first_exit: Optional[float] = None
    steps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    _ode: Optional[Callable] = field(default=None, repr=False)

    def state(self, r):
        """(u, P, v, Q) at radii r."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.zeros((4, r.size))
        if self._ode is None:
            return out
        inside = r >= self.r0
        if np.any(inside):
            out[:, inside] = self._ode(np.minimum(r[inside], self.r_end))
        if self.is_ball and np.any(~inside):
            rr = r[~inside]
            hu, hv = self.model.gradient(self.alpha, self.beta)
            N = self.N
            out[0, ~inside] = self.alpha - hv * rr**2 / (2 * N)
            out[1, ~inside] = -hv * rr**N / N
            out[2, ~inside] = self.beta - hu * rr**2 / (2 * N)
            out[3, ~inside] = -hu * rr**N / N
        return out

    def values(self, r):
        """(u, v, u', v') at radii r."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        u, P, v, Q = self.state(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = r ** (self.N - 1)
            du = np.where(r > 0, P / w, 0.0)
            dv = np.where(r > 0, Q / w, 0.0)
        if self.is_ball:
            small = r < self.r0
            if np.any(small):
                hu, hv = self.model.gradient(self.alpha, self.beta)
                du[small] = -hv * r[small] / self.N
                dv[small] = -hu * r[small] / self.N
        return u, v, du, dv

    def zeros(self, component: str) -> np.ndarray:
        """Sign changes of u or v in (r0, r_end], refined on the dense output."""
        if self._ode is None or self.steps.size < 2:
            return np.zeros(0)
        idx = 0 if component == "u" else 2
        t = self.steps
        sub = np.linspace(0.0, 1.0, 9)[:-1]
        rr = np.concatenate([(t[:-1, None] + (t[1:] - t[:-1])[:, None] * sub).ravel(), t[-1:]])
        y = self._ode(rr)[idx]
        f = lambda x: float(self._ode(x)[idx])
        out = []
        for i in range(1, rr.size - 1):
            if y[i] == 0.0 and y[i - 1] * y[i + 1] < 0:
                out.append(rr[i])
            elif y[i] * y[i + 1] < 0:
                out.append(brentq(f, rr[i], rr[i + 1], xtol=1e-15 * rr[i + 1], rtol=1e-15))
        if rr.size > 1 and y[0] * y[1] < 0:
            out.insert(0, brentq(f, rr[0], rr[1], xtol=1e-15 * rr[1], rtol=1e-15))
        return np.array(out)


def integrate_ivp(model: HamiltonianModel, domain: DomainSpec, alpha: float, beta: float,
                  r_end: Optional[float] = None, tol_ode: float = 1e-10,
                  cap: float = BLOWUP_CAP) -> Trajectory:
    """Integrate the radial system from the inner boundary.

    On a ball (alpha, beta) = (u(0), v(0)) with zero slopes, started at
    h0 = 1e-6·R from the second-order Taylor expansion; on an annulus
    (alpha, beta) = (u'(δ), v'(δ)) with u(δ) = v(δ) = 0.  ``r_end`` may exceed R
    (the system is autonomous in (u, v)).  Blow-up beyond ``cap`` stops the
    integration and is reported in ``first_exit``.
    """
    if not (math.isfinite(alpha) and math.isfinite(beta)):
        raise DomainError("shooting parameters must be finite")
    N = domain.N
    r_end = domain.R if r_end is None else float(r_end)
    if domain.is_ball:
        r0 = TAYLOR_START * domain.R
        hu, hv = model.gradient(alpha, beta)
        y0 = [alpha - hv * r0**2 / (2 * N), -hv * r0**N / N,
              beta - hu * r0**2 / (2 * N), -hu * r0**N / N]
    else:
        r0 = domain.r_in
        w = r0 ** (N - 1)
        y0 = [0.0, w * alpha, 0.0, w * beta]
    y0 = np.array([float(x) for x in y0])
    traj = Trajectory(N, model, r0, r_end, float(alpha), float(beta), domain.is_ball)
    if alpha == 0.0 and beta == 0.0:
        return traj

    def rhs(r, y):
        hu, hv = model.gradient(y[0], y[2])
        w = r ** (N - 1)
        return np.array([y[1] / w, -w * hv, y[3] / w, -w * hu])

    def blowup(r, y):
        return abs(y[0]) + abs(y[2]) - cap

    blowup.terminal = True
    blowup.direction = 1

    scale = max(abs(alpha), abs(beta)) * (1.0 if domain.is_ball else max(r0, 1e-3) ** (N - 1))
    res = solve_ivp(rhs, (r0, r_end), y0, method="DOP853", rtol=tol_ode,
                    atol=tol_ode * 1e-3 * scale, dense_output=True, events=blowup)
    if res.status == -1:
        raise SolverError(f"radial integration failed: {res.message}")
    traj.steps = res.t
    traj.r_end = float(res.t[-1])
    traj._ode = res.sol
    if res.status == 1:
        traj.first_exit = float(res.t[-1])
    return traj


# ----------------------------------------------------------------------------
# Solutions


@dataclass
class RadialSolution:
    """A radial solution sampled on a fixed grid, with a dense evaluator."""

    domain: DomainSpec
    model: HamiltonianModel
    r: np.ndarray
    u: np.ndarray
    v: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    alpha: float
    beta: float
    residual_norm: float = float("nan")
    method: str = "samples"
    candidates: list = field(default_factory=list)
    _dense: Optional[Callable] = field(default=None, repr=False)

    @property
    def N(self):
        return self.domain.N

    @classmethod
    def from_dense(cls, domain, model, dense, alpha, beta, n_nodes=2048, method="", sign=1.0):
        r = solution_grid(domain, n_nodes)
        if sign < 0:
            inner = dense
            dense = lambda x: tuple(-c for c in inner(x))
        u, v, du, dv = (np.asarray(c, dtype=float) for c in dense(r))
        return cls(domain, model, r, u, v, du, dv, sign * alpha, sign * beta,
                   method=method, _dense=dense)

    def evaluate(self, r):
        """(u, v, u', v') at radii r (dense output when available, else Hermite cubic)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self._dense is None:
            su = CubicHermiteSpline(self.r, self.u, self.du)
            sv = CubicHermiteSpline(self.r, self.v, self.dv)
            self._dense = lambda x: (su(x), sv(x), su(x, 1), sv(x, 1))
        return tuple(np.asarray(c, dtype=float) for c in self._dense(r))

    def second_derivatives(self, r):
        """u'', v'' from the equation itself: u'' = -H_v - (N-1)u'/r (limit -H_v/N at 0)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        u, v, du, dv = self.evaluate(r)
        hu, hv = self.model.gradient(u, v)
        N = self.N
        with np.errstate(divide="ignore", invalid="ignore"):
            d2u = np.where(r > 0, -hv - (N - 1) * du / r, -hv / N)
            d2v = np.where(r > 0, -hu - (N - 1) * dv / r, -hu / N)
        return d2u, d2v

    def scaled(self, lam: float) -> "RadialSolution":
        """Lane–Emden rescaling λ^A u(λr), λ^B v(λr), living on the domain of radius R/λ."""
        if not isinstance(self.model, LaneEmden):
            raise DomainError("scaling is only available for lane_emden models")
        A, B = self.model.scaling_exponents()
        if self.domain.is_ball:
            dom = DomainSpec(self.N, self.domain.R / lam)
        else:
            dom = DomainSpec(self.N, self.domain.R / lam, self.domain.delta / lam)
        base = self.evaluate

        def dense(x):
            u, v, du, dv = base(lam * np.asarray(x, dtype=float))
            return lam**A * u, lam**B * v, lam ** (A + 1) * du, lam ** (B + 1) * dv

        if dom.is_ball:
            a, b = lam**A * self.alpha, lam**B * self.beta
        else:
            a, b = lam ** (A + 1) * self.alpha, lam ** (B + 1) * self.beta
        return RadialSolution.from_dense(dom, self.model, dense, a, b, self.r.size, method=self.method + "+scaled")

    def boundary_defect(self) -> float:
        """Relative violation of the Dirichlet (and, on a ball, zero-slope) conditions."""
        su = max(float(np.max(np.abs(self.u))), 1e-300)
        sv = max(float(np.max(np.abs(self.v))), 1e-300)
        u, v, du, dv = self.evaluate([self.domain.r_in, self.domain.R])
        out = [abs(u[1]) / su, abs(v[1]) / sv]
        if self.domain.is_ball:
            out += [abs(du[0]) * self.domain.R / su, abs(dv[0]) * self.domain.R / sv]
        else:
            out += [abs(u[0]) / su, abs(v[0]) / sv]
        return float(max(out))

    def interior_zero_counts(self):
        """Number of sign changes of u and of v strictly inside (r_in, R)."""
        rr = refine(refine(self.r))[1:-1]
        u, v = self.evaluate(rr)[:2]
        return _count_sign_changes(u), _count_sign_changes(v)


def _count_sign_changes(y) -> int:
    s = np.sign(y)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def residual_check(sol: RadialSolution, refine_levels: int = 3) -> float:
    """Defect of the radial system on a refined verification grid.

    The flux P = r^{N-1}u' is differenced between consecutive nodes and
    compared with -r^{N-1}H_v at the midpoint (same for v).  The maximum of
    |defect_u| + |defect_v| is divided by the maximum of
    |r^{N-1}H_v| + |r^{N-1}H_u| so the number is comparable across amplitudes.
    Stores the value in ``sol.residual_norm``.
    """
    r = sol.r
    for _ in range(refine_levels):
        r = refine(r)
    N = sol.N
    u, v, du, dv = sol.evaluate(r)
    P, Q = r ** (N - 1) * du, r ** (N - 1) * dv
    mid = 0.5 * (r[1:] + r[:-1])
    h = np.diff(r)
    um, vm = sol.evaluate(mid)[:2]
    hu, hv = sol.model.gradient(um, vm)
    w = mid ** (N - 1)
    d1 = np.diff(P) / h + w * hv
    d2 = np.diff(Q) / h + w * hu
    scale = float(np.max(np.abs(w * hv) + np.abs(w * hu)))
    res = 0.0 if scale == 0.0 else float(np.max(np.abs(d1) + np.abs(d2)) / scale)
    sol.residual_norm = res
    return res


# ----------------------------------------------------------------------------
# Zero races and knife-edge bisection


def _race(model, domain, alpha, beta, m, r_end, r_max, tol_ode):
    """Integrate until u and v both have m zeros (extending r_end), or blow-up."""
    while True:
        traj = integrate_ivp(model, domain, alpha, beta, r_end=r_end, tol_ode=tol_ode)
        zu, zv = traj.zeros("u")[:m], traj.zeros("v")[:m]
        if traj.first_exit is not None or (zu.size >= m and zv.size >= m) or r_end >= r_max:
            return zu, zv, traj
        r_end *= 2.0


def _race_sign(zu, zv, m):
    """+1 if v runs ahead of u, -1 if u runs ahead, 0 on a tie in all m zeros."""
    zu = list(zu) + [math.inf] * (m - len(zu))
    zv = list(zv) + [math.inf] * (m - len(zv))
    for a, b in zip(zu, zv):
        if a != b:
            return 1 if a > b else -1
    return 0 if math.isfinite(zu[-1]) else None


@dataclass
class _Balanced:
    beta: float
    s_m: float
    t_m: float
    traj: Trajectory

    @property
    def mismatch(self):
        return abs(self.s_m - self.t_m) / max(self.s_m, 1e-300)


def _balance_beta(model, domain, alpha, m, r_end, r_max, tol_ode, ts=None):
    """All β = tα on the scan for which u and v reach their m-th zero together.

    For β below the balanced value the v-component runs ahead, above it the
    u-component does; each sign change of the race is bisected to round-off.
    """
    if ts is None:
        ts = np.unique(np.concatenate([np.geomspace(1e-2, 1e2, 33), [1.0]]))
    race = lambda b: _race(model, domain, alpha, b, m, r_end, r_max, tol_ode)
    signs = []
    found = []
    for t in ts:
        zu, zv, traj = race(t * alpha)
        s = _race_sign(zu, zv, m)
        signs.append(s)
        if s == 0:
            found.append(_Balanced(t * alpha, zu[m - 1], zv[m - 1], traj))
    diagnostics = {"scan_t": [float(t) for t in ts], "race_signs": signs}
    for i in range(len(ts) - 1):
        if signs[i] == 1 and signs[i + 1] == -1:
            lo, hi = ts[i] * alpha, ts[i + 1] * alpha
            if alpha < 0:
                lo, hi = hi, lo
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if not lo < mid < hi:
                    break
                zu, zv, _t = race(mid)
                s = _race_sign(zu, zv, m)
                if s == 0:
                    lo = hi = mid
                    break
                if (s == 1) == (alpha > 0):
                    lo = mid
                else:
                    hi = mid
            best = None
            for b in {lo, hi}:
                zu, zv, traj = race(b)
                if zu.size >= m and zv.size >= m:
                    cand = _Balanced(b, zu[m - 1], zv[m - 1], traj)
                    if best is None or cand.mismatch < best.mismatch:
                        best = cand
            if best is not None:
                found.append(best)
    return found, diagnostics


# ----------------------------------------------------------------------------
# Strategies


def _lane_emden_ball(model: LaneEmden, domain, m, tol_ode, tol_match, n_nodes):
    """Fix u(0) = 1, balance β, then rescale the m-th common zero to R."""
    unit = DomainSpec(domain.N, 1.0)
    if model.is_symmetric:
        zu, zv, traj = _race(model, unit, 1.0, 1.0, m, 20.0, 1e4, tol_ode)
        if zu.size < m:
            raise NotFoundError("symmetric Lane-Emden trajectory has fewer than m zeros",
                                {"zeros_u": zu.tolist(), "first_exit": traj.first_exit})
        roots = [_Balanced(1.0, zu[m - 1], zv[m - 1], traj)]
        diagnostics = {}
    else:
        roots, diagnostics = _balance_beta(model, unit, 1.0, m, 20.0, 1e3, tol_ode)
        roots = [b for b in roots if b.mismatch <= tol_match]
        if not roots:
            raise NotFoundError("no balanced β found for the Lane-Emden system", diagnostics)
    A, B = model.scaling_exponents()
    cands = []
    for b in roots:
        lam = b.s_m / domain.R
        cands.append((lam**A * 1.0, lam**B * b.beta, lam, b))
    cands.sort(key=lambda c: abs(c[0]))
    alpha, beta, lam, b = cands[0]
    traj = b.traj

    def dense(x):
        u, v, du, dv = traj.values(lam * np.asarray(x, dtype=float))
        return lam**A * u, lam**B * v, lam ** (A + 1) * du, lam ** (B + 1) * dv

    sol = RadialSolution.from_dense(domain, model, dense, alpha, beta, n_nodes, method="lane_emden_scaling")
    sol.candidates = [{"alpha": float(c[0]), "beta": float(c[1])} for c in cands]
    return sol


def _zeros_before(traj, R, which="u"):
    z = traj.zeros(which)
    return int(np.count_nonzero(z < R))


def _diagonal(model, domain, m, tol_ode, n_nodes):
    """Symmetric H: u ≡ v, so one parameter α (centre value or boundary slope)."""
    R = domain.R

    def count(a):
        traj = integrate_ivp(model, domain, a, a, r_end=R, tol_ode=tol_ode)
        if traj.first_exit is not None:
            return m + 1, traj
        return _zeros_before(traj, R * (1 - 1e-12)), traj

    lo, hi = 1.0, 1.0
    while count(lo)[0] >= m:
        lo *= 0.5
        if lo < 1e-12:
            raise NotFoundError("could not bracket the shooting parameter from below", {"alpha_lo": lo})
    while count(hi)[0] < m:
        hi *= 2.0
        if hi > 1e12:
            raise NotFoundError("could not bracket the shooting parameter from above", {"alpha_hi": hi})
    while hi / lo > 1.0 + 1e-3:
        mid = math.sqrt(lo * hi)
        if count(mid)[0] >= m:
            hi = mid
        else:
            lo = mid

    def uR(a):
        traj = integrate_ivp(model, domain, a, a, r_end=R, tol_ode=tol_ode)
        return float(traj.state(R)[0, 0])

    if uR(lo) * uR(hi) > 0:
        raise NotFoundError("u(R) does not change sign across the nodal transition",
                            {"alpha_bracket": [lo, hi]})
    alpha = brentq(uR, lo, hi, xtol=1e-15 * hi, rtol=1e-15)
    traj = integrate_ivp(model, domain, alpha, alpha, r_end=R, tol_ode=tol_ode)
    sol = RadialSolution.from_dense(domain, model, traj.values, alpha, alpha, n_nodes, method="diagonal_shooting")
    sol.candidates = [{"alpha": float(alpha), "beta": float(alpha)}]
    return sol


def _newton_polish(shoot, x0, max_iter=40, rel_step=1e-7):
    """Damped Newton on a 2-D map with a forward-difference Jacobian."""
    x = np.array(x0, dtype=float)
    fx = shoot(x)
    for _ in range(max_iter):
        nrm = np.linalg.norm(fx)
        if nrm == 0:
            break
        J = np.empty((2, 2))
        for j in range(2):
            dx = np.zeros(2)
            dx[j] = rel_step * max(abs(x[j]), 1e-8)
            J[:, j] = (shoot(x + dx) - fx) / dx[j]
        try:
            step = np.linalg.solve(J, -fx)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        improved = False
        for _ in range(30):
            xn = x + t * step
            fn = shoot(xn)
            if np.all(np.isfinite(fn)) and np.linalg.norm(fn) < nrm:
                x, fx, improved = xn, fn, True
                break
            t *= 0.5
        if not improved:
            break
    return x, fx


def _nested(model, domain, m, tol_ode, tol_match, n_nodes):
    """Outer root finding on α for the common m-th zero at R, inner β balance."""
    R = domain.R
    state = {"ts": None}

    def rho(a):
        ts = state["ts"]
        found, diag = _balance_beta(model, domain, a, m, 2 * R, 64 * R, tol_ode, ts=ts)
        found = [f for f in found if f.mismatch <= tol_match]
        if not found:
            raise NotFoundError("β balance failed on the ray scan", diag)
        best = min(found, key=lambda f: f.mismatch)
        t = best.beta / a
        state["ts"] = np.array([t / 1.5, t, t * 1.5])
        state["best"] = best
        return best.s_m

    a_lo, a_hi = 1.0, 1.0
    while rho(a_lo) < R:
        a_lo *= 0.5
    while rho(a_hi) > R:
        a_hi *= 2.0
    state["ts"] = None
    alpha = brentq(lambda a: rho(a) - R, a_lo, a_hi, xtol=1e-14 * a_hi, rtol=1e-14)
    rho(alpha)
    beta = state["best"].beta

    def shoot(x):
        traj = integrate_ivp(model, domain, x[0], x[1], r_end=R, tol_ode=tol_ode)
        if traj.first_exit is not None:
            return np.array([np.inf, np.inf])
        u, _, v, _ = traj.state(R)[:, 0]
        return np.array([u, v])

    (alpha, beta), _ = _newton_polish(shoot, [alpha, beta])
    traj = integrate_ivp(model, domain, alpha, beta, r_end=R, tol_ode=tol_ode)
    sol = RadialSolution.from_dense(domain, model, traj.values, alpha, beta, n_nodes, method="nested_shooting")
    sol.candidates = [{"alpha": float(alpha), "beta": float(beta)}]
    return sol


def _homotopy_model(F, G, t):
    g = [(c * (1 - t), e) for c, e in F if t < 1] + [(c * t, e) for c, e in G if t > 0]
    return SeparablePowers(F=F, G=tuple(g))


def _remesh(res, n):
    """Equidistribute n nodes against a derivative monitor of a collocation solution.

    solve_bvp only ever inserts nodes; redistributing after each accepted
    continuation step keeps the mesh from growing along the path.
    """
    x = res.x
    fine = np.unique(np.concatenate([x, 0.5 * (x[1:] + x[:-1])]))
    y = res.sol(fine)
    dy = np.abs(res.sol(fine, 1))
    scale = np.max(dy, axis=1, keepdims=True)
    scale[scale == 0] = 1.0
    w = 1.0 + np.sum((dy / scale) ** (1.0 / 3.0), axis=0) * (fine[-1] - fine[0]) * 4
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(fine))])
    xn = np.interp(np.linspace(0, cum[-1], n), cum, fine)
    xn[0], xn[-1] = fine[0], fine[-1]
    xn = np.unique(xn)
    return xn, res.sol(xn)


def _continuation(model, domain, m, tol_ode, n_nodes, path_tol=1e-6, final_tol=1e-8):
    """Collocation continuation from the symmetric surrogate F(v) + F(u) to H.

    Forward shooting loses the m-th zero for non-symmetric H once m >= 2
    (deviations from the balanced β grow by many orders of magnitude per
    nodal zone), while the boundary value problem itself stays well posed.
    """
    sep = model.as_separable() if isinstance(model, LaneEmden) else model
    if not isinstance(sep, SeparablePowers):
        raise NotFoundError("continuation needs a separable model")
    start = _diagonal(SeparablePowers(F=sep.F, G=sep.F), domain, m, tol_ode, n_nodes)
    N, r_in, R = domain.N, domain.r_in, domain.R
    x = start.r
    u, v, du, dv = start.evaluate(x)
    y = np.vstack([u, du, v, dv])
    S = np.diag([0.0, -(N - 1.0), 0.0, -(N - 1.0)]) if domain.is_ball else None

    def make_fun(h):
        def fun(r, y):
            hu, hv = h.gradient(y[0], y[2])
            out = np.vstack([y[1], -hv, y[3], -hu])
            if S is None:
                out[1] -= (N - 1) * y[1] / r
                out[3] -= (N - 1) * y[3] / r
            return out
        return fun

    if domain.is_ball:
        bc = lambda ya, yb: np.array([ya[1], ya[3], yb[0], yb[2]])
    else:
        bc = lambda ya, yb: np.array([ya[0], ya[2], yb[0], yb[2]])

    # follow the path loosely, then tighten once on the target problem
    t, dt = -0.1, 0.1
    while t < 1.0:
        tn = max(0.0, min(1.0, t + dt))
        h = _homotopy_model(sep.F, sep.G, tn)
        res = solve_bvp(make_fun(h), bc, x, y, S=S, tol=path_tol, max_nodes=40000)
        if res.success:
            t = tn
            x, y = _remesh(res, 1500) if res.x.size > 1500 else (res.x, res.y)
            dt = min(0.25, dt * 1.5)
        else:
            dt *= 0.5
            if dt < 1e-4:
                raise NotFoundError("collocation continuation stalled", {"t": t, "message": res.message})
    for tol in (final_tol, 10 * final_tol, path_tol):
        res = solve_bvp(make_fun(model), bc, x, y, S=S, tol=tol, max_nodes=400000, bc_tol=1e-12)
        if res.success:
            break
        log.info("collocation refinement at tol=%g failed: %s", tol, res.message)
    else:
        raise NotFoundError("collocation refinement failed", {"message": res.message})
    x, y, spline = res.x, res.y, res.sol

    def dense(r):
        yy = spline(np.asarray(r, dtype=float))
        return yy[0], yy[2], yy[1], yy[3]

    if domain.is_ball:
        alpha, beta = float(y[0, 0]), float(y[2, 0])
    else:
        alpha, beta = float(y[1, 0]), float(y[3, 0])
    sol = RadialSolution.from_dense(domain, model, dense, alpha, beta, n_nodes, method="collocation_continuation")
    sol.candidates = [{"alpha": alpha, "beta": beta}]
    return sol


def find_solution(model: HamiltonianModel, domain: DomainSpec, m: int, first_sign: str = "+", *,
                  tol_ode: float = 1e-10, tol_bc: float = 1e-8, tol_residual: float = 1e-6,
                  n_nodes: int = 2048) -> RadialSolution:
    """Radial solution whose components have exactly m nodal zones.

    Strategy
    --------
    * symmetric H (H(u,v) = H(v,u)): u ≡ v, one-parameter shooting (Lane–Emden
      on a ball additionally uses the scaling reduction);
    * non-symmetric Lane–Emden on a ball with m = 1: u(0) = 1, bisection of
      the zero race in β, then rescaling of the common zero to R;
    * otherwise: collocation continuation from the symmetric surrogate
      F(v) + F(u), with nested ray bisection plus Newton polish as the m = 1
      fallback.
    """
    m = int(m)
    if not 1 <= m <= MAX_NODAL_ZONES:
        raise DomainError(f"m must be in 1..{MAX_NODAL_ZONES}, got {m}")
    if first_sign not in ("+", "-"):
        raise DomainError("first_sign must be '+' or '-'")
    if first_sign == "-" and not model.is_even:
        raise DomainError("negative first sign requires an even Hamiltonian")
    tol_match = 1e-7
    is_le = isinstance(model, LaneEmden)
    if model.is_symmetric:
        if is_le and domain.is_ball:
            sol = _lane_emden_ball(model, domain, m, tol_ode, tol_match, n_nodes)
        else:
            sol = _diagonal(model, domain, m, tol_ode, n_nodes)
    elif is_le and domain.is_ball and m == 1:
        try:
            sol = _lane_emden_ball(model, domain, m, tol_ode, tol_match, n_nodes)
        except NotFoundError as exc:
            log.info("zero race failed (%s); switching to continuation", exc)
            sol = _continuation(model, domain, m, tol_ode, n_nodes)
    else:
        # for m >= 2 the race for the m-th zero is decided at relative
        # β-offsets far below double precision, so the boundary value problem
        # is solved directly; nested shooting remains as a fallback for m = 1
        try:
            sol = _continuation(model, domain, m, tol_ode, n_nodes)
        except NotFoundError as exc:
            if m != 1:
                raise
            log.info("continuation failed (%s); trying nested shooting", exc)
            sol = _nested(model, domain, m, tol_ode, tol_match, n_nodes)

    if first_sign == "-":
        sol = RadialSolution.from_dense(domain, model, sol.evaluate, sol.alpha, sol.beta, n_nodes,
                                        method=sol.method, sign=-1.0)

    residual_check(sol)
    if sol.residual_norm > tol_residual:
        raise SolverError(f"residual {sol.residual_norm:.3e} exceeds tol_residual {tol_residual:.1e}")
    bc = sol.boundary_defect()
    if bc > tol_bc:
        raise SolverError(f"boundary defect {bc:.3e} exceeds tol_bc {tol_bc:.1e}")
    nu, nv = sol.interior_zero_counts()
    if nu != m - 1 or nv != m - 1:
        raise ConsistencyError(f"nodal count mismatch: u has {nu + 1} zones, v has {nv + 1}, expected {m}")
    return sol


# ----------------------------------------------------------------------------
# Persistence


def write_solution_csv(sol: RadialSolution, path) -> None:
    """Comment header with model, N, domain, shooting parameters and residual, then r,u,v,du,dv."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# model={json.dumps(sol.model.to_dict(), sort_keys=True, separators=(',', ':'))}\n")
        fh.write(f"# N={sol.N}\n")
        fh.write(f"# domain={json.dumps(sol.domain.to_dict(), sort_keys=True, separators=(',', ':'))}\n")
        fh.write(f"# alpha={sol.alpha:.17g}\n# beta={sol.beta:.17g}\n# residual={sol.residual_norm:.17g}\n")
        fh.write("r,u,v,du,dv\n")
        for row in zip(sol.r, sol.u, sol.v, sol.du, sol.dv):
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def read_solution_csv(path) -> RadialSolution:
    """Inverse of :func:`write_solution_csv`; the dense evaluator becomes a cubic Hermite spline."""

    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, val = line[1:].strip().partition("=")
            meta[key] = val
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=7, ndmin=2)
    model = model_from_dict(json.loads(meta["model"]))
    domain = DomainSpec.from_dict(json.loads(meta["domain"]))
    r, u, v, du, dv = data.T
    return RadialSolution(domain, model, r, u, v, du, dv, float(meta["alpha"]), float(meta["beta"]),
                          residual_norm=float(meta["residual"]), method="csv")
