"""Zeros, critical points and the intertwining of nodal zones of radial solutions."""

from __future__ import annotations

import math

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DegeneracyError
from .geometry import refine

REFINE_TOL = 1e-10  # relative to R
DEGENERACY_TOL = 1e-8  # relative to sup norms


@dataclass
class NodalData:
    """Interior zeros, critical points and zone signs of both components.

    Zones of u are [s_0, s_1], …, [s_{m-1}, s_m] with s_0 = r_in and s_m = R;
    likewise for v with the t_i.
    """

    r_in: float
    R: float
    zeros_u: np.ndarray
    zeros_v: np.ndarray
    critical_u: np.ndarray
    critical_v: np.ndarray
    signs_u: np.ndarray
    signs_v: np.ndarray

    @property
    def m(self) -> int:
        return len(self.zeros_u) + 1

    @property
    def n(self) -> int:
        return len(self.zeros_v) + 1

    def markers(self, which: str) -> np.ndarray:
        z = self.zeros_u if which == "u" else self.zeros_v
        return np.concatenate([[self.r_in], z, [self.R]])

    def to_dict(self):
        f = lambda a: [float(x) for x in a]
        return {"zeros_u": f(self.zeros_u), "zeros_v": f(self.zeros_v),
                "critical_u": f(self.critical_u), "critical_v": f(self.critical_v),
                "signs_u": [int(s) for s in self.signs_u], "signs_v": [int(s) for s in self.signs_v],
                "r_in": float(self.r_in), "R": float(self.R)}


def _roots(f, r, y, xtol):
    """Sign changes of the samples y = f(r), refined by Brent's method."""
    out = []
    for i in range(r.size - 1):
        if y[i] == 0.0:
            if 0 < i and y[i - 1] * y[i + 1] < 0:
                out.append(r[i])
        elif y[i] * y[i + 1] < 0:
            out.append(brentq(f, r[i], r[i + 1], xtol=xtol, rtol=1e-15))
    return np.array(out)


def _component(sol, idx, r, vals, R):
    """Zeros, critical points and zone signs of component idx (0 = u, 1 = v)."""
    y, dy = vals[idx], vals[idx + 2]
    ysup = float(np.max(np.abs(y))) or 1.0
    dsup = float(np.max(np.abs(dy))) or 1.0
    xtol = REFINE_TOL * R
    inner = slice(1, -1)

    graze = (np.abs(y[inner]) < DEGENERACY_TOL * ysup) & (np.abs(dy[inner]) < DEGENERACY_TOL * dsup)
    if np.any(graze):
        raise DegeneracyError(f"grazing zero near r = {r[inner][graze][0]:.6g}")

    f = lambda x: float(sol.evaluate([x])[idx][0])
    df = lambda x: float(sol.evaluate([x])[idx + 2][0])
    zeros = _roots(f, r[inner], y[inner], xtol)
    for s in zeros:
        if abs(df(s)) < DEGENERACY_TOL * dsup:
            raise DegeneracyError(f"zero at r = {s:.6g} is not simple")

    # the proof's device on annuli: σ = inf{r : u'(r) = 0}, so scanning starts past r_in
    crit = list(_roots(df, r[inner], dy[inner], xtol))
    if abs(dy[0]) <= DEGENERACY_TOL * dsup:
        crit.insert(0, r[0])
    # a zero touched at a stationary point slips between samples; test the refined critical points
    for c in crit:
        if abs(f(c)) < DEGENERACY_TOL * ysup:
            raise DegeneracyError(f"grazing zero at critical point r = {c:.6g}")

    bounds = np.concatenate([[r[0]], zeros, [R]])
    mids = 0.5 * (bounds[1:] + bounds[:-1])
    signs = np.sign(sol.evaluate(mids)[idx]).astype(int)
    return zeros, np.array(crit), signs


def extract_nodal_data(sol, levels: int = 2) -> NodalData:
    """Locate zeros and critical points of u and v on a refined copy of the solution grid."""
    r = sol.r
    for _ in range(levels):
        r = refine(r)
    vals = sol.evaluate(r)
    R = float(r[-1])
    zu, cu, su = _component(sol, 0, r, vals, R)
    zv, cv, sv = _component(sol, 1, r, vals, R)
    return NodalData(float(r[0]), R, zu, zv, cu, cv, su, sv)


@dataclass
class Check:
    name: str
    passed: bool
    margin: float

    def to_dict(self):
        return {"name": self.name, "pass": bool(self.passed), "margin": float(self.margin)}


@dataclass
class ProfileReport:
    passed: bool
    checks: list = field(default_factory=list)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"pass": bool(self.passed), "checks": [c.to_dict() for c in self.checks]}


def _zone_counts(crit, bounds):
    counts = []
    for i in range(bounds.size - 1):
        lo, hi = bounds[i], bounds[i + 1]
        if i == 0:
            inside = (crit >= lo) & (crit < hi)
        else:
            inside = (crit > lo) & (crit < hi)
        counts.append(int(np.count_nonzero(inside)))
    return counts


def verify_profile(data: NodalData, tol: float = REFINE_TOL) -> ProfileReport:
    """Run the five profile checks; failures are report entries, never exceptions.

    (i) equal zone counts, (ii) equal sign in the first zone, (iii) i-th zones
    of u and v intersect, (iv) σ_i and τ_i lie in that intersection, (v) one
    critical point per zone.
    """
    slack = tol * data.R
    su, tv = data.markers("u"), data.markers("v")
    k = min(data.m, data.n)
    checks = [Check("equal_zone_count", data.m == data.n, -abs(data.m - data.n))]

    same = float(data.signs_u[0] * data.signs_v[0]) if data.signs_u.size and data.signs_v.size else -1.0
    checks.append(Check("first_zone_same_sign", same > 0, same))

    lo = np.maximum(su[:k], tv[:k])
    hi = np.minimum(su[1:k + 1], tv[1:k + 1])
    overlap = hi - lo
    checks.append(Check("zones_intersect", bool(np.all(overlap > 0)), float(np.min(overlap))))

    margins = []
    for i in range(k):
        for crit in (data.critical_u, data.critical_v):
            if i >= crit.size:
                margins.append(-np.inf)
                continue
            c = crit[i]
            # the centre of a ball is a critical point by symmetry; no lower margin there
            lower = np.inf if (c == data.r_in == 0.0 and lo[i] == 0.0) else c - lo[i]
            margins.append(min(lower, hi[i] - c))
    m4 = float(min(margins)) if margins else -np.inf
    checks.append(Check("critical_points_in_intersection", m4 >= -slack, m4))

    cu = _zone_counts(data.critical_u, su)
    cv = _zone_counts(data.critical_v, tv)
    dev = max(abs(c - 1) for c in cu + cv)
    checks.append(Check("one_critical_point_per_zone", dev == 0, -float(dev)))

    return ProfileReport(all(c.passed for c in checks), checks)


def interlacing_holds(data: NodalData, tol: float = REFINE_TOL) -> bool:
    """Zero interlacing s_i ≤ t_{i+1} and t_i ≤ s_{i+1}, boundary markers included."""
    s, t = data.markers("u"), data.markers("v")
    slack = tol * data.R
    k = min(s.size, t.size)
    ok = all(s[i] <= t[i + 1] + slack for i in range(k - 1))
    return ok and all(t[i] <= s[i + 1] + slack for i in range(k - 1))


def interlacing_margin(data: NodalData) -> float:
    """min over i of t_{i+1} - s_i and s_{i+1} - t_i; positive when the zeros interlace strictly."""
    s, t = data.markers("u"), data.markers("v")
    k = min(s.size, t.size)
    gaps = [t[i + 1] - s[i] for i in range(k - 1)] + [s[i + 1] - t[i] for i in range(k - 1)]
    return float(min(gaps)) if gaps else math.inf
