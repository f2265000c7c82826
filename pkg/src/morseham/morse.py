"""
Spherical-harmonic bookkeeping and the Morse index of radial solutions.

A negative singular radial eigenvalue Λ̂ combines with every spherical
harmonic of degree j whose Laplace–Beltrami eigenvalue λ_j = j(N+j-2) keeps
λ_j + Λ̂ negative; each such degree contributes its multiplicity N_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import AmbiguityError, DomainError, SolverError
from .spectra import NEGATIVE_TOL, SpectralProblem, inertia_report
from .geometry import DomainSpec

TIE_TOL = 1e-9


def beltrami_eigenvalue(j: int, N: int) -> int:
    """λ_j = j(N + j - 2)."""
    _check_jN(j, N)
    return j * (N + j - 2)


def beltrami_multiplicity(j: int, N: int) -> int:
    """N_j = (N + 2j - 2)(N + j - 3)! / ((N - 2)! j!), exactly (N_0 = 1)."""
    _check_jN(j, N)
    if j == 0:
        return 1
    num = (N + 2 * j - 2) * math.factorial(N + j - 3)
    den = math.factorial(N - 2) * math.factorial(j)
    q, rem = divmod(num, den)
    assert rem == 0
    return q


def _check_jN(j, N):
    if int(j) != j or j < 0:
        raise DomainError(f"degree j must be a nonnegative integer, got {j}")
    if int(N) != N or N < 2:
        raise DomainError(f"dimension N must be an integer >= 2, got {N}")


@dataclass(frozen=True)
class AngularData:
    j: int
    eigenvalue: int
    multiplicity: int

    @classmethod
    def of(cls, j, N):
        return cls(j, beltrami_eigenvalue(j, N), beltrami_multiplicity(j, N))


@dataclass(frozen=True)
class Cutoff:
    M: int
    exact: bool
    closed_form: int


def angular_cutoff_closed_form(lam_hat: float, N: int) -> int:
    """Smallest n ≥ 0 with n ≥ √(((N-2)/2)² - Λ̂) - N/2."""
    x = math.sqrt(((N - 2) / 2.0) ** 2 - lam_hat) - N / 2.0
    return max(0, math.ceil(x))


def angular_cutoff(lam_hat: float, N: int, tie_tol: float = TIE_TOL) -> Cutoff:
    """Largest degree j with λ_j + Λ̂ < -tie_tol, by enumeration.

    ``exact`` is False when some λ_j + Λ̂ falls within tie_tol of zero; off
    ties the enumeration must agree with the closed form.
    """
    if not lam_hat < 0:
        raise DomainError(f"only negative radial eigenvalues contribute, got {lam_hat}")
    exact = True
    M, j = -1, 0
    while True:
        s = beltrami_eigenvalue(j, N) + lam_hat
        if abs(s) <= tie_tol:
            exact = False
        if s < -tie_tol:
            M = j
        elif s > tie_tol:
            break
        j += 1
    M = max(M, 0) if lam_hat < -tie_tol else 0
    closed = angular_cutoff_closed_form(lam_hat, N)
    if exact and closed != M:
        raise SolverError(f"angular cutoff mismatch: enumeration {M}, closed form {closed}")
    return Cutoff(M, exact, closed)


def radial_morse_index(potential, domain: DomainSpec, M: int = 2048) -> int:
    """Negative eigenvalue count of the regular a-problem, required equal on M and 2M-1 nodes."""
    rep = inertia_report(SpectralProblem.regular(domain, potential, M))
    if not rep["stable"]:
        raise SolverError(f"radial index unstable under grid refinement: {rep['count']} vs {rep['count_refined']}")
    return rep["count"]


@dataclass
class Contribution:
    k: int
    lambda_hat: float
    source: str
    M_k: int
    terms: list

    def to_dict(self):
        return {"k": self.k, "lambda_hat": float(self.lambda_hat), "source": self.source, "M_k": self.M_k,
                "terms": [{"j": j, "lambda_j": lj, "N_j": nj} for j, lj, nj in self.terms]}

    @property
    def total(self):
        return sum(t[2] for t in self.terms)


def full_morse_index(lam_hats: Sequence[float], N: int, m_lin_rad: Optional[int] = None,
                     sources: Optional[Sequence[str]] = None, tie_tol: float = TIE_TOL) -> dict:
    """Σ_k Σ_{j ≤ M_k} N_j over the negative singular radial eigenvalues.

    Near-zero eigenvalues and degree ties are refused, never guessed.  When
    ``m_lin_rad`` is given the variant m_lin_rad + Σ_k Σ_{j ≤ M_k} N_j is
    reported as well.
    """
    sources = list(sources) if sources is not None else ["a"] * len(lam_hats)
    contributions = []
    for k, (lh, src) in enumerate(zip(lam_hats, sources), 1):
        if not lh < -NEGATIVE_TOL:
            raise AmbiguityError(f"singular eigenvalue {lh} is not strictly negative")
        cut = angular_cutoff(lh, N, tie_tol)
        if not cut.exact:
            raise AmbiguityError(f"singular eigenvalue {lh} ties with a Laplace–Beltrami eigenvalue")
        terms = [(j, beltrami_eigenvalue(j, N), beltrami_multiplicity(j, N)) for j in range(cut.M + 1)]
        contributions.append(Contribution(k, float(lh), src, cut.M, terms))
    m_lin = sum(c.total for c in contributions)
    out = {"m_lin": m_lin, "contributions": contributions, "j0_total": len(contributions)}
    if m_lin_rad is not None:
        out["m_lin_prop12"] = m_lin_rad + m_lin
        out["prop12_difference"] = m_lin_rad
    return out


@dataclass
class MorseReport:
    m: int
    N: int
    m_lin_rad: int
    singular_a: list
    singular_b: list
    contributions: list
    m_lin: int
    m_lin_prop12: int
    flags: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def to_dict(self):
        return {"m": self.m, "N": self.N, "m_lin_rad": self.m_lin_rad,
                "singular_a": [float(x) for x in self.singular_a],
                "singular_b": [float(x) for x in self.singular_b],
                "contributions": [c.to_dict() for c in self.contributions],
                "m_lin": self.m_lin, "m_lin_prop12": self.m_lin_prop12,
                "prop12_difference": self.m_lin_prop12 - self.m_lin,
                "flags": self.flags, "checks": self.checks}


def build_report(m: int, N: int, m_lin_rad: int, singular_a, singular_b=(), checks=None,
                 tie_tol: float = TIE_TOL) -> MorseReport:
    """Assemble the index report from the radial count and the singular lists of a and b."""
    neg_a = [x for x in singular_a if x < -NEGATIVE_TOL]
    neg_b = [x for x in singular_b if x < -NEGATIVE_TOL]
    frag = full_morse_index(neg_a + neg_b, N, m_lin_rad, ["a"] * len(neg_a) + ["b"] * len(neg_b), tie_tol)
    rep = MorseReport(m, N, m_lin_rad, list(singular_a), list(singular_b), frag["contributions"],
                      frag["m_lin"], frag["m_lin_prop12"], checks=dict(checks or {}))
    rep.checks["j0_equals_radial_index"] = frag["j0_total"] == m_lin_rad
    rep.flags = verify_theorem_bounds(rep, N)
    return rep


def verify_theorem_bounds(report: MorseReport, N: int) -> dict:
    """Index bounds for an m-nodal solution, each with its numeric margin.

    uno: m_lin_rad ≥ m.  due: m_lin ≥ m_lin_rad + (m-1)N ≥ m + (m-1)N.
    tre (m ≥ 2): Λ̂_1 < … < Λ̂_{m-1} < -(N-1) on the a-problem.
    """
    m = report.m
    flags = {}
    mu = report.m_lin_rad - m
    flags["uno"] = {"holds": mu >= 0, "margin": mu}
    d1 = report.m_lin - report.m_lin_rad - (m - 1) * N
    d2 = report.m_lin - m - (m - 1) * N
    flags["due"] = {"holds": d1 >= 0 and d2 >= 0, "margin": min(d1, d2)}
    if m >= 2:
        lams = sorted(report.singular_a)[: m - 1]
        if len(lams) < m - 1:
            flags["tre"] = {"holds": None, "margin": None, "reason": "fewer than m-1 singular eigenvalues"}
        else:
            increasing = all(x < y for x, y in zip(lams, lams[1:]))
            margin = -(N - 1) - lams[-1]
            flags["tre"] = {"holds": bool(increasing and margin > 0), "margin": float(margin)}
    else:
        flags["tre"] = {"holds": None, "margin": None, "reason": "m = 1"}
    return flags
