"""
Radial Sturm–Liouville eigenproblems

    -(r^{N-1} ξ')' + r^{N-1} c ξ = μ w(r) ξ,   w = r^{N-1} (regular) or r^{N-3} (singular),

discretized by conservative finite differences into a symmetric tridiagonal
pencil (A, B) with B diagonal and positive.  Negative counts come from the
inertia of A - λB (Sturm sequence of the LDLᵀ pivots), eigenvalues from
bisection on the equivalent scaled matrix B^{-1/2} A B^{-1/2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError, SolverError
from .geometry import DEFAULT_EPSILON, DEFAULT_RATIO, DomainSpec, extended_cutoff_grid, radial_grid, refine

NEGATIVE_TOL = 1e-10
TOL_THRESHOLD = 1e-8
EIG_ABSTOL = 1e-12


def _as_potential(c) -> Callable:
    if c is None:
        return lambda r: np.zeros_like(np.asarray(r, dtype=float))
    if callable(c):
        return c
    val = float(c)
    return lambda r: np.full(np.shape(r), val)


@dataclass
class SpectralProblem:
    """A radial eigenproblem on a fixed grid.

    ``inner`` is 'natural' (flux closure at the centre of a ball, no condition
    imposed) or 'dirichlet' (annulus, or cutoff sphere of radius ε).  The
    outer end is always Dirichlet.
    """

    N: int
    grid: np.ndarray
    potential: Callable = None
    weight: str = "regular"
    inner: str = "dirichlet"
    epsilon: Optional[float] = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.potential = _as_potential(self.potential)
        if self.grid.size < 3 or np.any(np.diff(self.grid) <= 0):
            raise DomainError("spectral grid must be strictly increasing with at least 3 nodes")
        if self.weight not in ("regular", "singular"):
            raise DomainError(f"unknown weight {self.weight!r}")
        if self.inner not in ("natural", "dirichlet"):
            raise DomainError(f"unknown inner condition {self.inner!r}")
        if self.inner == "natural" and self.grid[0] != 0.0:
            raise DomainError("natural closure is only used at the centre of a ball")
        if self.weight == "singular" and self.grid[0] <= 0.0:
            raise DomainError("singular weight needs a positive inner cutoff")

    @property
    def M(self):
        return self.grid.size

    @property
    def hardy_threshold(self):
        return ((self.N - 2) / 2.0) ** 2

    def refined(self) -> "SpectralProblem":
        return SpectralProblem(self.N, refine(self.grid), self.potential, self.weight, self.inner, self.epsilon)

    def shifted(self, K: float) -> "SpectralProblem":
        c = self.potential
        return SpectralProblem(self.N, self.grid, lambda r: c(r) + K, self.weight, self.inner, self.epsilon)

    @classmethod
    def regular(cls, domain: DomainSpec, potential=None, M: int = 2048, ratio: float = DEFAULT_RATIO):
        if domain.is_ball:
            return cls(domain.N, np.linspace(0.0, domain.R, M), potential, "regular", "natural")
        return cls(domain.N, radial_grid(domain.r_in, domain.R, M, ratio), potential, "regular", "dirichlet")

    @classmethod
    def singular(cls, domain: DomainSpec, potential=None, M: int = 2048, epsilon: Optional[float] = None,
                 ratio: float = DEFAULT_RATIO):
        if domain.is_ball:
            eps = DEFAULT_EPSILON * domain.R if epsilon is None else float(epsilon)
            if not 0 < eps < domain.R:
                raise DomainError("singular ball problem needs 0 < epsilon < R")
            return cls(domain.N, radial_grid(eps, domain.R, M, ratio), potential, "singular", "dirichlet", eps)
        return cls(domain.N, radial_grid(domain.r_in, domain.R, M, ratio), potential, "singular", "dirichlet")


def _power_integral(lo, hi, e):
    """∫_lo^hi r^e dr, exactly."""
    if e == -1:
        return np.log(hi / lo)
    return (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)


def dual_cell_weights(grid: np.ndarray, exponent: float) -> np.ndarray:
    """∫ r^exponent over each node's dual cell (midpoint to midpoint, clipped at the ends)."""
    mid = 0.5 * (grid[1:] + grid[:-1])
    lo = np.concatenate([[grid[0]], mid])
    hi = np.concatenate([mid, [grid[-1]]])
    return _power_integral(lo, hi, exponent)


@dataclass
class Pencil:
    """Tridiagonal A (diag d, off-diagonal e) and diagonal B on the free nodes."""

    d: np.ndarray
    e: np.ndarray
    B: np.ndarray
    nodes: np.ndarray  # indices of the free nodes in the full grid
    grid: np.ndarray

    def scaled(self):
        s = np.sqrt(self.B)
        return self.d / self.B, self.e / (s[:-1] * s[1:])

    def dense(self):
        """(A, B) as dense arrays, for oracle comparisons."""
        A = np.diag(self.d) + np.diag(self.e, 1) + np.diag(self.e, -1)
        return A, np.diag(self.B)


def assemble_discretization(problem: SpectralProblem) -> Pencil:
    """Conservative flux discretization.

    Interval i contributes the flux weight k_i = r_{i+1/2}^{N-1}/h_i to its two
    end nodes.  The mass and potential weights of node i are exact integrals of
    r^{N-1} (or r^{N-3}) over its dual cell, which keeps B > 0 even at r = 0.
    """
    r, N = problem.grid, problem.N
    h = np.diff(r)
    mid = 0.5 * (r[1:] + r[:-1])
    k = mid ** (N - 1) / h
    w_pot = dual_cell_weights(r, N - 1)
    w_eig = w_pot if problem.weight == "regular" else dual_cell_weights(r, N - 3)
    c = np.asarray(problem.potential(r), dtype=float)
    if not np.all(np.isfinite(c)):
        raise DomainError("potential is not finite on the grid")
    diag = np.zeros(r.size)
    diag[:-1] += k
    diag[1:] += k
    diag += c * w_pot
    start = 0 if problem.inner == "natural" else 1
    nodes = np.arange(start, r.size - 1)
    return Pencil(diag[nodes].copy(), -k[start:r.size - 2].copy(), w_eig[nodes].copy(), nodes, r)


def sturm_count(pencil: Pencil, lam) -> np.ndarray:
    """Number of eigenvalues of the pencil below each λ (inertia of A - λB).

    Returns (counts, hit_zero) where hit_zero marks λ values at which an exact
    zero pivot occurred (the count is then taken at λ + tiny).
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    d, e, B = pencil.d, pencil.e, pencil.B
    cnt = np.zeros(lam.shape, dtype=int)
    hit = np.zeros(lam.shape, dtype=bool)
    tiny = np.finfo(float).tiny
    q = d[0] - lam * B[0]
    for i in range(d.size):
        if i > 0:
            q = d[i] - lam * B[i] - e[i - 1] ** 2 / q
        zero = q == 0.0
        if np.any(zero):
            hit |= zero
            q = np.where(zero, -tiny, q)
        cnt += q < 0
    return cnt, hit


def count_negative_raw(problem: SpectralProblem):
    """(count, perturbed) for a single grid; a zero pivot at λ = 0 is resolved at -1e-13."""
    pen = assemble_discretization(problem)
    cnt, hit = sturm_count(pen, 0.0)
    if hit[0]:
        cnt, _ = sturm_count(pen, -1e-13)
        return int(cnt[0]), True
    return int(cnt[0]), False


def count_negative(problem: SpectralProblem) -> int:
    """Exact number of negative eigenvalues of the discrete problem on its own grid."""
    return count_negative_raw(problem)[0]


def inertia_report(problem: SpectralProblem) -> dict:
    """Negative counts on the grid and on its refinement, with a stability flag."""
    c1, p1 = count_negative_raw(problem)
    c2, p2 = count_negative_raw(problem.refined())
    return {"count": c1, "count_refined": c2, "stable": c1 == c2, "zero_pivot": bool(p1 or p2)}


def _smallest(pencil: Pencil, k: int, vectors: bool):
    d, e = pencil.scaled()
    k = min(k, d.size)
    if k <= 0:
        return np.zeros(0), None
    out = eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1), eigvals_only=not vectors,
                           tol=EIG_ABSTOL)
    if vectors:
        lam, y = out
        x = y / np.sqrt(pencil.B)[:, None]
        full = np.zeros((pencil.grid.size, k))
        full[pencil.nodes] = x
        return lam, full
    return out, None


def _verify_inertia(pencil: Pencil, lam: np.ndarray):
    """Bracket every eigenvalue by the Sturm count; any inconsistency is a breakdown."""
    if lam.size == 0:
        return
    delta = 1e-9 * np.maximum(1.0, np.abs(lam))
    below, _ = sturm_count(pencil, lam - delta)
    above, _ = sturm_count(pencil, lam + delta)
    k = np.arange(1, lam.size + 1)
    if np.any(below > k - 1) or np.any(above < k) or np.any(np.diff(above) < 0):
        raise SolverError("Sturm inertia inconsistent with computed eigenvalues")


@dataclass
class Spectrum:
    """Smallest eigenvalues of a radial problem, Richardson-extrapolated in h."""

    eigenvalues: np.ndarray
    error_estimates: np.ndarray
    flags: list
    N: int
    coarse: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fine: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eigenvectors: Optional[np.ndarray] = None
    grid: Optional[np.ndarray] = None
    below_threshold_count: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def hardy_threshold(self):
        return ((self.N - 2) / 2.0) ** 2

    @property
    def negative_count(self) -> int:
        return int(np.count_nonzero(self.eigenvalues < -NEGATIVE_TOL))

    def rows(self):
        for k, (lam, err, flag) in enumerate(zip(self.eigenvalues, self.error_estimates, self.flags), 1):
            yield k, float(lam), float(err), flag

    def to_dict(self):
        return {"eigenvalues": [float(x) for x in self.eigenvalues],
                "error_estimates": [float(x) for x in self.error_estimates],
                "flags": list(self.flags), "negative_count": self.negative_count,
                "hardy_threshold": self.hardy_threshold,
                "below_threshold_count": int(self.below_threshold_count), "meta": self.meta}


def _richardson(coarse, fine):
    k = min(coarse.size, fine.size)
    ext = (4.0 * fine[:k] - coarse[:k]) / 3.0
    return ext, np.abs(ext - fine[:k])


def _kernel_flags(lam, err):
    return ["kernel_candidate" if abs(x) <= max(NEGATIVE_TOL, 10 * e) else "" for x, e in zip(lam, err)]


def eigen_solve(problem: SpectralProblem, k_max: int, vectors: bool = False, richardson: bool = True) -> Spectrum:
    """k_max smallest eigenvalues, with a two-grid (M, 2M-1) Richardson estimate.

    Eigenvectors, when requested, are those of the refined grid, B-normalized
    and padded with the Dirichlet zeros.
    """
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    pc = assemble_discretization(problem)
    lam_c, _ = _smallest(pc, k_max, False)
    _verify_inertia(pc, lam_c)
    if richardson:
        fine_problem = problem.refined()
        pf = assemble_discretization(fine_problem)
        lam_f, vec = _smallest(pf, k_max, vectors)
        _verify_inertia(pf, lam_f)
        ext, err = _richardson(lam_c, lam_f)
        grid = fine_problem.grid
    else:
        lam_f, vec = _smallest(pc, k_max, vectors)
        ext, err = lam_c, np.zeros_like(lam_c)
        grid = problem.grid
    theta = problem.hardy_threshold
    below = int(np.count_nonzero(ext < theta - TOL_THRESHOLD)) if problem.weight == "singular" else 0
    meta = {"M": problem.M, "weight": problem.weight, "inner": problem.inner}
    return Spectrum(ext, err, _kernel_flags(ext, err), problem.N, lam_c, lam_f,
                    vec[:, : ext.size] if vec is not None else None, grid, below, meta)


def regular_radial_eigenvalues(potential, domain: DomainSpec, k_max: int, M: int = 2048,
                               vectors: bool = False) -> Spectrum:
    """Regular-weight eigenvalues μ_1 ≤ μ_2 ≤ … for the potential a or b."""
    problem = SpectralProblem.regular(domain, potential, M)
    spec = eigen_solve(problem, k_max, vectors=vectors)
    spec.meta["inertia"] = inertia_report(problem)
    return spec


def _power_extrapolate(l1, l2, ratio, theta):
    """ε → 0 limit from cutoffs ε and ε/ratio, for a power law ε^s with s = 2√(θ - Λ)."""
    s = 2.0 * math.sqrt(max(theta - l2, 0.0))
    if s == 0.0:
        return l2
    return l2 - (l1 - l2) / (ratio**s - 1.0)


def _log_extrapolate(l1, l2, L1, L2):
    """ε → 0 limit for λ(ε) = λ∞ + C/ln²(R/ε), from two cutoffs with L = ln(R/ε)."""
    return (l2 * L2**2 - l1 * L1**2) / (L2**2 - L1**2)


def singular_radial_eigenvalues(potential, domain: DomainSpec, M: int = 2048, epsilon: Optional[float] = None,
                                tol_threshold: float = TOL_THRESHOLD, ratio: float = DEFAULT_RATIO) -> Spectrum:
    """Singular-weight eigenvalues Λ̂_1 < Λ̂_2 < … strictly below the Hardy threshold.

    On a ball the problem is solved with Dirichlet cutoffs at ε and ε' ≈ ε/2
    (grids identical above ε), each Richardson-extrapolated in h, and each
    eigenvalue is extrapolated to ε → 0 with the power law ε^{2√(θ-Λ)} of the
    eigenfunction's behaviour at the origin.  Eigenvalues within tol_threshold
    of θ are flagged 'threshold_ambiguous' and excluded from the list.  The
    lowest eigenvalue is always tracked in ``meta['floor']``; when it is not
    below θ its limit is estimated from the log model θ + C/ln²(R/ε).  Only
    eigenvalues already below θ at the finer cutoff are listed: a floor value
    whose log fit dips under θ is model error, not a bound state.
    """
    N = domain.N
    theta = ((N - 2) / 2.0) ** 2
    if not domain.is_ball:
        problem = SpectralProblem.singular(domain, potential, M, ratio=ratio)
        pen = assemble_discretization(problem.refined())
        n_below = int(sturm_count(pen, theta + tol_threshold)[0][0])
        spec = eigen_solve(problem, max(n_below, 1))
        keep = spec.eigenvalues < theta - tol_threshold
        ambiguous = np.abs(spec.eigenvalues - theta) <= tol_threshold
        flags = ["threshold_ambiguous" if a else f for a, f in zip(ambiguous, spec.flags)]
        spec.meta["floor"] = {"raw": float(spec.eigenvalues[0]), "extrapolated": float(spec.eigenvalues[0])}
        spec.meta["ambiguous"] = [float(x) for x in spec.eigenvalues[ambiguous]]
        spec.meta["inertia"] = inertia_report(problem)
        spec.eigenvalues, spec.error_estimates = spec.eigenvalues[keep], spec.error_estimates[keep]
        spec.flags = [f for f, k in zip(flags, keep) if k]
        spec.below_threshold_count = int(keep.sum())
        return spec

    p1 = SpectralProblem.singular(domain, potential, M, epsilon, ratio)
    g2, factor = extended_cutoff_grid(p1.grid, ratio)
    p2 = SpectralProblem(N, g2, p1.potential, "singular", "dirichlet", p1.epsilon / factor)
    n_below = int(sturm_count(assemble_discretization(p2.refined()), theta + tol_threshold)[0][0])
    k = max(n_below, 1)
    s1 = eigen_solve(p1, k)
    s2 = eigen_solve(p2, k)
    R = domain.R
    L1, L2 = math.log(R / p1.epsilon), math.log(R / p2.epsilon)
    vals, errs, flags, ambiguous = [], [], [], []
    for i in range(min(s1.eigenvalues.size, s2.eigenvalues.size)):
        l1, l2 = s1.eigenvalues[i], s2.eigenvalues[i]
        if abs(l2 - theta) <= tol_threshold:
            ambiguous.append(float(l2))
            continue
        if l2 > theta:
            # still on the threshold floor at the finest cutoff: not resolvable as a bound state
            continue
        lim = _power_extrapolate(l1, l2, factor, theta)
        err = abs(lim - l2) + s2.error_estimates[i]
        if lim < theta - tol_threshold:
            vals.append(lim)
            errs.append(err)
            flags.append("kernel_candidate" if abs(lim) <= max(NEGATIVE_TOL, 10 * err) else "")
    floor_raw = float(s1.eigenvalues[0])
    floor = {"raw": floor_raw, "raw_half_cutoff": float(s2.eigenvalues[0]),
             "extrapolated": float(_log_extrapolate(s1.eigenvalues[0], s2.eigenvalues[0], L1, L2)
                                   if s2.eigenvalues[0] >= theta else
                                   _power_extrapolate(s1.eigenvalues[0], s2.eigenvalues[0], factor, theta))}
    meta = {"M": M, "epsilon": p1.epsilon, "epsilon_half": p2.epsilon, "floor": floor,
            "ambiguous": ambiguous, "at_epsilon": [float(x) for x in s1.eigenvalues],
            "at_epsilon_half": [float(x) for x in s2.eigenvalues],
            "inertia": inertia_report(p2)}
    return Spectrum(np.array(vals), np.array(errs), flags, N, s1.eigenvalues, s2.eigenvalues,
                    None, None, len(vals), meta)
