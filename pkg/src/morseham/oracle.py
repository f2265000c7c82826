"""
Independent checks on the scalar pipeline.

The coupled two-component pencil is discretized directly (no a/b splitting)
and solved by block-Sturm bisection; the quadratic forms of the linearized
system and of the action are evaluated on grid vectors and by Gauss
quadrature on truncated test functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, SolverError
from .geometry import DomainSpec, refine
from .hamiltonian import potentials_from_hessian
from .nodal import NodalData, extract_nodal_data
from .spectra import (SpectralProblem, assemble_discretization, dual_cell_weights, eigen_solve)

BISECT_WIDTH = 1e-12


# ----------------------------------------------------------------------------
# Coupled pencil


@dataclass
class CoupledPencil:
    """Block tridiagonal pencil on interleaved unknowns (φ_0, ψ_0, φ_1, ψ_1, …).

    Diagonal block i is [[d_i, y_i], [y_i, d_i]] with d the flux part plus
    -H_uv·w and y = -½(H_uu + H_vv)·w; off-diagonal blocks are e_i·I; the weight
    is B_i·I.
    """

    d: np.ndarray
    y: np.ndarray
    e: np.ndarray
    B: np.ndarray
    nodes: np.ndarray
    grid: np.ndarray

    @property
    def n(self):
        return self.d.size

    def scaled(self):
        s = np.sqrt(self.B)
        return self.d / self.B, self.y / self.B, self.e / (s[:-1] * s[1:])

    def banded(self, shift: float = 0.0):
        """Scaled matrix minus shift·I in LAPACK (2, 2) band storage."""
        d, y, e = self.scaled()
        n2 = 2 * self.n
        ab = np.zeros((5, n2))
        ab[2, 0::2] = d - shift
        ab[2, 1::2] = d - shift
        ab[1, 1::2] = y          # (2i, 2i+1)
        ab[3, 0::2] = y          # (2i+1, 2i)
        ab[0, 2::2] = e          # (2i, 2i+2)
        ab[0, 3::2] = e          # (2i+1, 2i+3)
        ab[4, : n2 - 2 : 2] = e  # (2i+2, 2i)
        ab[4, 1 : n2 - 2 : 2] = e
        return ab

    def quadratic(self, phi, psi):
        """x^T A x for x = (φ, ψ) on the free nodes (unscaled)."""
        return (phi @ self._tri(phi) + psi @ self._tri(psi) + 2.0 * np.sum(self.y * phi * psi))

    def mass(self, phi, psi):
        return float(np.sum(self.B * (phi**2 + psi**2)))

    def _tri(self, x):
        out = self.d * x
        out[:-1] += self.e * x[1:]
        out[1:] += self.e * x[:-1]
        return out


def _hessian_on(sol, model, r):
    u, v = sol.evaluate(r)[:2]
    return model.hessian(u, v)


def assemble_coupled(sol, weight: str = "regular", M: int = 2048, epsilon: Optional[float] = None,
                     model=None) -> CoupledPencil:
    """Coupled pencil on exactly the grid the scalar solver uses for the same (weight, M, ε)."""
    model = model or sol.model
    if weight == "regular":
        base = SpectralProblem.regular(sol.domain, None, M)
    else:
        base = SpectralProblem.singular(sol.domain, None, M, epsilon)
    return coupled_from_problem(sol, base, model)


def coupled_from_problem(sol, base: SpectralProblem, model=None) -> CoupledPencil:
    model = model or sol.model
    r = base.grid
    huu, huv, hvv = _hessian_on(sol, model, r)
    diag = SpectralProblem(base.N, r, lambda x: -np.interp(x, r, huv), base.weight, base.inner, base.epsilon)
    pen = assemble_discretization(diag)
    w = dual_cell_weights(r, base.N - 1)
    y = -0.5 * (huu + hvv) * w
    return CoupledPencil(pen.d, y[pen.nodes], pen.e, pen.B, pen.nodes, r)


def block_sturm_count(cp: CoupledPencil, lam) -> np.ndarray:
    """Eigenvalues of the coupled pencil below λ, by block LDLᵀ of the scaled matrix."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    d, y, e = cp.scaled()
    cnt = np.zeros(lam.shape, dtype=int)
    # inverse of the previous 2x2 pivot block: [[p, q], [q, s]]
    p = np.zeros_like(lam)
    q = np.zeros_like(lam)
    s = np.zeros_like(lam)
    for i in range(d.size):
        d11 = d[i] - lam
        d22 = d[i] - lam
        d12 = np.full_like(lam, y[i])
        if i > 0:
            e2 = e[i - 1] ** 2
            d11 = d11 - e2 * p
            d22 = d22 - e2 * s
            d12 = d12 - e2 * q
        det = d11 * d22 - d12 * d12
        det = np.where(det == 0.0, -np.finfo(float).tiny, det)
        cnt += np.where(det < 0, 1, np.where(d11 < 0, 2, 0))
        p, s, q = d22 / det, d11 / det, -d12 / det
    return cnt


@dataclass
class CoupledSpectrum:
    eigenvalues: np.ndarray
    grid: np.ndarray
    nodes: np.ndarray
    phi: Optional[np.ndarray] = None  # columns are eigenvectors on the full grid
    psi: Optional[np.ndarray] = None
    pencil: Optional[CoupledPencil] = None

    @property
    def negative_count(self):
        return int(np.count_nonzero(self.eigenvalues < -1e-10))


def _inverse_iteration(cp: CoupledPencil, lam: float, iters: int = 4):
    n2 = 2 * cp.n
    shift = lam - 1e-10 * max(1.0, abs(lam))
    ab = cp.banded(shift)
    rng = np.random.default_rng(12345)
    x = rng.standard_normal(n2)
    for _ in range(iters):
        x = solve_banded((2, 2), ab, x)
        x /= np.linalg.norm(x)
    return x


def coupled_spectrum(sol, weight: str = "regular", k_max: int = 6, M: int = 2048, epsilon=None,
                     vectors: bool = False, model=None, pencil: Optional[CoupledPencil] = None) -> CoupledSpectrum:
    """k_max smallest eigenvalues of the coupled pencil by vectorized block-Sturm bisection.

    Eigenvectors (optional) by inverse iteration with a banded LU, returned
    B-normalized on the full grid with the Dirichlet zeros restored.
    """
    cp = pencil if pencil is not None else assemble_coupled(sol, weight, M, epsilon, model)
    d, y, e = cp.scaled()
    k_max = min(k_max, 2 * cp.n)
    # Gershgorin bracket
    off = np.abs(y) + np.concatenate([np.abs(e), [0.0]]) + np.concatenate([[0.0], np.abs(e)])
    lo = np.full(k_max, float(np.min(d - off)) - 1.0)
    hi = np.full(k_max, float(np.max(d + off)) + 1.0)
    ks = np.arange(1, k_max + 1)
    while np.max(hi - lo) > BISECT_WIDTH * np.maximum(1.0, np.max(np.abs(hi))):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        c = block_sturm_count(cp, mid)
        up = c >= ks
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    lam = 0.5 * (lo + hi)
    if np.any(np.diff(lam) < -BISECT_WIDTH * 10):
        raise SolverError("block Sturm bisection produced nonmonotone eigenvalues")
    out = CoupledSpectrum(lam, cp.grid, cp.nodes, pencil=cp)
    if vectors:
        phi = np.zeros((cp.grid.size, k_max))
        psi = np.zeros((cp.grid.size, k_max))
        sB = np.sqrt(cp.B)
        for j in range(k_max):
            x = _inverse_iteration(cp, lam[j])
            f, g = x[0::2] / sB, x[1::2] / sB
            nrm = np.sqrt(cp.mass(f, g))
            phi[cp.nodes, j], psi[cp.nodes, j] = f / nrm, g / nrm
        out.phi, out.psi = phi, psi
    return out


def decoupling_check(sol, weight: str = "regular", k_max: int = 6, M: int = 2048, epsilon=None) -> dict:
    """Coupled spectrum versus the merged scalar a/b spectra on the identical grid.

    Also reports the entrywise deviation of the block-diagonalized coupled
    pencil from the scalar pencils and, for negative eigenvalues, the relative
    antisymmetric part ‖φ - ψ‖/‖φ‖ of the coupled eigenvectors.
    """
    cs = coupled_spectrum(sol, weight, k_max, M, epsilon, vectors=True)
    cp = cs.pencil
    r = cp.grid
    huu, huv, hvv = _hessian_on(sol, sol.model, r)
    a, b = potentials_from_hessian(huu, huv, hvv)
    mk = lambda c: SpectralProblem(sol.domain.N, r, lambda x, c=c: np.interp(x, r, c), weight,
                                   "natural" if r[0] == 0.0 else "dirichlet",
                                   r[0] if weight == "singular" else None)
    pa, pb = mk(a), mk(b)
    sa = eigen_solve(pa, k_max, richardson=False).eigenvalues
    sb = eigen_solve(pb, k_max, richardson=False).eigenvalues
    merged = np.sort(np.concatenate([sa, sb]))[: cs.eigenvalues.size]
    Aa, Ab = assemble_discretization(pa), assemble_discretization(pb)
    block_dev = max(float(np.max(np.abs(cp.d + cp.y - Aa.d))), float(np.max(np.abs(cp.d - cp.y - Ab.d))),
                    float(np.max(np.abs(cp.e - Aa.e))), float(np.max(np.abs(cp.e - Ab.e))))
    structure = []
    for j in np.flatnonzero(cs.eigenvalues < -1e-10):
        f, g = cs.phi[:, j], cs.psi[:, j]
        structure.append(float(np.linalg.norm(f - g) / np.linalg.norm(f)))
    return {"weight": weight, "coupled": [float(x) for x in cs.eigenvalues],
            "merged_scalar": [float(x) for x in merged], "a": [float(x) for x in sa], "b": [float(x) for x in sb],
            "union_max_deviation": float(np.max(np.abs(cs.eigenvalues - merged))),
            "block_max_deviation": block_dev,
            "negative_count": cs.negative_count,
            "antisymmetric_parts": structure,
            "max_antisymmetric_part": max(structure) if structure else 0.0,
            "b_smallest": float(sb[0])}


# ----------------------------------------------------------------------------
# Quadratic forms on grid vectors


def _grid_forms(sol, grid, model):
    N = sol.domain.N
    r = np.asarray(grid, dtype=float)
    h = np.diff(r)
    k = (0.5 * (r[1:] + r[:-1])) ** (N - 1) / h
    w = dual_cell_weights(r, N - 1)
    huu, huv, hvv = _hessian_on(sol, model, r)
    return k, w, huu, huv, hvv


def default_grid(sol, M: int = 2048):
    return SpectralProblem.regular(sol.domain, None, M).grid


def quad_form_lin(sol, phi, psi, grid=None, model=None) -> float:
    """Q_lin(φ, ψ) = ∫ r^{N-1} (φ'² + ψ'² - (H_uu + H_vv)φψ - H_uv(φ² + ψ²)) on grid samples.

    Gradients are differenced per interval and weighted by r_{i+1/2}^{N-1};
    the potential part uses the same dual-cell weights as the spectral pencil,
    so Q_lin(x) = xᵀAx for the coupled pencil A.
    """
    grid = default_grid(sol) if grid is None else grid
    k, w, huu, huv, hvv = _grid_forms(sol, grid, model or sol.model)
    dp, dq = np.diff(phi), np.diff(psi)
    return float(np.sum(k * (dp**2 + dq**2)) - np.sum(w * ((huu + hvv) * phi * psi + huv * (phi**2 + psi**2))))


def quad_form_action(sol, phi, psi, grid=None, model=None) -> float:
    """Q_I(φ, ψ) = ∫ r^{N-1} (2φ'ψ' - D²H(φ, ψ)·(φ, ψ)) with the same discretization."""
    grid = default_grid(sol) if grid is None else grid
    k, w, huu, huv, hvv = _grid_forms(sol, grid, model or sol.model)
    dp, dq = np.diff(phi), np.diff(psi)
    return float(2.0 * np.sum(k * dp * dq) - np.sum(w * (huu * phi**2 + 2 * huv * phi * psi + hvv * psi**2)))


def random_test_functions(grid, count: int = 20, seed: int = 20240611, modes: int = 8, inner_zero=None):
    """Deterministic pseudo-random radial functions vanishing at the Dirichlet ends."""
    rng = np.random.default_rng(seed)
    r = np.asarray(grid, dtype=float)
    r0, R = r[0], r[-1]
    x = (r - r0) / (R - r0)
    inner_zero = r0 > 0 if inner_zero is None else inner_zero
    out = []
    for _ in range(count):
        c = rng.standard_normal(modes) / (1.0 + np.arange(modes))
        if inner_zero:
            f = sum(cj * np.sin((j + 1) * np.pi * x) for j, cj in enumerate(c))
        else:
            f = sum(cj * np.cos((j + 0.5) * np.pi * x) for j, cj in enumerate(c))
        out.append(f)
    return out


# ----------------------------------------------------------------------------
# Derivative pair


def derivative_pair_residual(sol, grid=None, model=None, levels: int = 1) -> float:
    """Defect of the equations satisfied by (ξ, η) = (u', v').

        -(r^{N-1}ξ')' - r^{N-1}(H_uv ξ + H_vv η) + (N-1) r^{N-3} ξ,
        -(r^{N-1}η')' - r^{N-1}(H_uu ξ + H_uv η) + (N-1) r^{N-3} η.

    The flux r^{N-1}ξ' is formed from ξ' = u'' taken from the system itself
    and differenced once between nodes; the defect at midpoints is divided by
    the largest magnitude of the non-differentiated terms.  The default grid is
    the solution grid refined ``levels`` times.
    """
    model = model or sol.model
    if grid is None:
        grid = sol.r
        for _ in range(levels):
            grid = refine(grid)
    r = np.asarray(grid, dtype=float)
    r = r[r > 0]
    N = sol.domain.N
    d2u, d2v = sol.second_derivatives(r)
    Fu, Fv = r ** (N - 1) * d2u, r ** (N - 1) * d2v
    mid = 0.5 * (r[1:] + r[:-1])
    h = np.diff(r)
    u, v, xi, eta = sol.evaluate(mid)
    huu, huv, hvv = model.hessian(u, v)
    w1, w3 = mid ** (N - 1), mid ** (N - 3.0)
    t1 = w1 * (huv * xi + hvv * eta)
    t2 = w1 * (huu * xi + huv * eta)
    s1, s2 = (N - 1) * w3 * xi, (N - 1) * w3 * eta
    d1 = -np.diff(Fu) / h - t1 + s1
    d2 = -np.diff(Fv) / h - t2 + s2
    scale = float(np.max(np.abs(t1) + np.abs(s1) + np.abs(t2) + np.abs(s2)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(d1) + np.abs(d2)) / scale)


# ----------------------------------------------------------------------------
# Truncated test functions, by composite Gauss–Legendre quadrature

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _gauss_nodes(breaks):
    b = np.unique(np.asarray(breaks, dtype=float))
    a, c = b[:-1], b[1:]
    half = 0.5 * (c - a)
    x = (0.5 * (a + c))[:, None] + half[:, None] * _GL_X[None, :]
    w = half[:, None] * _GL_W[None, :]
    return x.ravel(), w.ravel()


@dataclass
class _Piece:
    """Restriction of f (with derivative df) to [lo, hi], zero elsewhere."""

    lo: float
    hi: float
    f: np.ndarray
    df: np.ndarray


def _truncate(x, lo, hi, f, df):
    inside = (x >= lo) & (x <= hi)
    return np.where(inside, f, 0.0), np.where(inside, df, 0.0)


def _q_lin_pieces(sol, model, x, w, phi, dphi, psi, dpsi):
    N = sol.domain.N
    u, v = sol.evaluate(x)[:2]
    huu, huv, hvv = model.hessian(u, v)
    integrand = dphi**2 + dpsi**2 - (huu + hvv) * phi * psi - huv * (phi**2 + psi**2)
    return float(np.sum(w * x ** (N - 1) * integrand))


@dataclass
class EstimateReport:
    nodal: list = field(default_factory=list)       # per i: {"i", "Q_lin", "holds"}
    derivative: list = field(default_factory=list)  # per k: {"k", "Q_lin", "hardy", "raw_margin", "margin", "holds"}
    notes: list = field(default_factory=list)

    @property
    def nodal_holds(self):
        return all(e["holds"] for e in self.nodal)

    @property
    def derivative_holds(self):
        return all(e["holds"] for e in self.derivative)

    def to_dict(self):
        return {"nodal": self.nodal, "derivative": self.derivative, "notes": self.notes,
                "nodal_holds": self.nodal_holds, "derivative_holds": self.derivative_holds}


def test_function_estimates(sol, nodal: Optional[NodalData] = None, model=None, tol: float = 1e-8) -> EstimateReport:
    """Q_lin on the nodal truncations (u_i, v_i) and derivative truncations (ξ_k, η_k).

    First family: Q_lin(u_i, v_i) < 0 for i = 1..m.  Second family (m ≥ 2):
    Q_lin(ξ_k, η_k) + (N-1)∫ r^{N-3}(ξ_k² + η_k²) ≤ tol for k = 1..m-1, with
    (ξ_k, η_k) scaled so that the Hardy-type term equals 1 (the inequality is
    invariant under scaling, the tolerance is not).
    Integrals use 10-point Gauss–Legendre on every grid interval, with the
    truncation points inserted as breakpoints.
    """
    model = model or sol.model
    nd = nodal if nodal is not None else extract_nodal_data(sol)
    if nd.m != nd.n:
        raise DomainError("test-function estimates need equal zone counts")
    N, m = sol.domain.N, nd.m
    s, t = nd.markers("u"), nd.markers("v")
    base = np.concatenate([sol.r, s, t, nd.critical_u, nd.critical_v])
    x, w = _gauss_nodes(base)
    u, v, du, dv = sol.evaluate(x)
    d2u, d2v = sol.second_derivatives(x)
    rep = EstimateReport()
    if not sol.domain.is_ball:
        rep.notes.append("annulus: derivative identity applied on (delta, R)")

    for i in range(1, m + 1):
        phi, dphi = _truncate(x, s[i - 1], s[i], u, du)
        psi, dpsi = _truncate(x, t[i - 1], t[i], v, dv)
        q = _q_lin_pieces(sol, model, x, w, phi, dphi, psi, dpsi)
        rep.nodal.append({"i": i, "Q_lin": q, "holds": bool(q < 0)})

    sig, tau = nd.critical_u, nd.critical_v
    for k in range(1, m):
        if k >= sig.size or k >= tau.size:
            rep.notes.append(f"missing critical points for k = {k}")
            continue
        phi, dphi = _truncate(x, sig[k - 1], sig[k], du, d2u)
        psi, dpsi = _truncate(x, tau[k - 1], tau[k], dv, d2v)
        q = _q_lin_pieces(sol, model, x, w, phi, dphi, psi, dpsi)
        hardy = (N - 1) * float(np.sum(w * x ** (N - 3.0) * (phi**2 + psi**2)))
        # both sides are quadratic in (ξ_k, η_k): normalize the Hardy term to 1
        margin = (q + hardy) / hardy if hardy > 0 else float("inf")
        rep.derivative.append({"k": k, "Q_lin": q, "hardy": hardy, "raw_margin": q + hardy,
                               "margin": margin, "holds": bool(margin <= tol)})
    return rep
