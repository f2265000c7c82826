"""
Hamiltonian families H(u, v), their derivatives, and the structural
predicates (convexity, strong coupling) that decide which results apply.

All evaluators accept scalars or numpy arrays and broadcast.  The odd powers
|s|^{p-1} s are evaluated as sign(s) |s|^p so negative arguments never produce
complex values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError


def _finite(*arrays):
    out = [np.asarray(a, dtype=float) for a in arrays]
    for a in out:
        if not np.all(np.isfinite(a)):
            raise DomainError("non-finite argument passed to a Hamiltonian evaluator")
    return out


def _odd_power(s, p):
    return np.sign(s) * np.abs(s) ** p


class HamiltonianModel:
    """Interface for an autonomous Hamiltonian H(u, v).

    Subclasses implement ``_H``, ``_grad`` and ``_hess`` on finite float arrays.
    Only the closed-form families below are used in production; tests build
    small stubs on top of this class.
    """

    kind = "abstract"

    def H(self, u, v):
        u, v = _finite(u, v)
        return self._H(u, v)

    def gradient(self, u, v):
        u, v = _finite(u, v)
        return self._grad(u, v)

    def hessian(self, u, v):
        u, v = _finite(u, v)
        return self._hess(u, v)

    @property
    def is_symmetric(self) -> bool:
        """True when H(u, v) = H(v, u), so that u = v is an invariant subspace."""
        return False

    @property
    def is_even(self) -> bool:
        """True when H(-u, -v) = H(u, v), so that (-u, -v) is again a solution."""
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _H(self, u, v):
        raise NotImplementedError

    def _grad(self, u, v):
        raise NotImplementedError

    def _hess(self, u, v):
        raise NotImplementedError


@dataclass(frozen=True)
class LaneEmden(HamiltonianModel):
    """H(u, v) = |u|^{p+1}/(p+1) + |v|^{q+1}/(q+1), giving -Δu = |v|^{q-1}v, -Δv = |u|^{p-1}u."""

    p: float
    q: float
    kind = "lane_emden"

    def __post_init__(self):
        for name in ("p", "q"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 1.0:
                raise DomainError(f"lane_emden exponent {name} must be finite and > 1, got {val}")

    @property
    def is_symmetric(self):
        return self.p == self.q

    @property
    def is_even(self):
        return True

    def scaling_exponents(self):
        """Exponents (A, B) such that λ^A u(λr), λ^B v(λr) is again a solution."""
        d = self.p * self.q - 1.0
        return 2.0 * (self.q + 1.0) / d, 2.0 * (self.p + 1.0) / d

    def as_separable(self) -> "SeparablePowers":
        return SeparablePowers(
            F=((1.0 / (self.q + 1.0), self.q + 1.0),),
            G=((1.0 / (self.p + 1.0), self.p + 1.0),),
        )

    def to_dict(self):
        return {"kind": self.kind, "p": float(self.p), "q": float(self.q)}

    def _H(self, u, v):
        p, q = self.p, self.q
        return np.abs(u) ** (p + 1) / (p + 1) + np.abs(v) ** (q + 1) / (q + 1)

    def _grad(self, u, v):
        return _odd_power(u, self.p), _odd_power(v, self.q)

    def _hess(self, u, v):
        # p > 1, so the limit at u = 0 is the finite value 0
        huu = self.p * np.abs(u) ** (self.p - 1)
        hvv = self.q * np.abs(v) ** (self.q - 1)
        return huu, np.zeros(np.broadcast(u, v).shape), hvv


def _terms(raw, name) -> tuple:
    out = []
    for item in raw:
        if len(item) != 2:
            raise DomainError(f"{name} terms must be (coefficient, exponent) pairs")
        c, g = float(item[0]), float(item[1])
        if not (np.isfinite(c) and c > 0):
            raise DomainError(f"{name} coefficient must be > 0, got {c}")
        if not (np.isfinite(g) and g > 2):
            raise DomainError(f"{name} exponent must be > 2, got {g}")
        out.append((c, g))
    if not out:
        raise DomainError(f"{name} needs at least one term")
    return tuple(sorted(out, key=lambda t: (t[1], t[0])))


@dataclass(frozen=True)
class SeparablePowers(HamiltonianModel):
    """H(u, v) = F(v) + G(u) with F(s) = Σ c_i |s|^{γ_i} and G likewise (c_i > 0, γ_i > 2)."""

    F: tuple = field(default=())
    G: tuple = field(default=())
    kind = "separable_powers"

    def __post_init__(self):
        object.__setattr__(self, "F", _terms(self.F, "F"))
        object.__setattr__(self, "G", _terms(self.G, "G"))

    @property
    def is_symmetric(self):
        return self.F == self.G

    @property
    def is_even(self):
        return True

    def to_dict(self):
        return {"kind": self.kind, "F": [list(t) for t in self.F], "G": [list(t) for t in self.G]}

    @staticmethod
    def _f(terms, s):
        return sum(c * np.abs(s) ** g for c, g in terms)

    @staticmethod
    def _df(terms, s):
        return sum(c * g * _odd_power(s, g - 1) for c, g in terms)

    @staticmethod
    def _d2f(terms, s):
        return sum(c * g * (g - 1) * np.abs(s) ** (g - 2) for c, g in terms)

    def _H(self, u, v):
        return self._f(self.F, v) + self._f(self.G, u)

    def _grad(self, u, v):
        return self._df(self.G, u), self._df(self.F, v)

    def _hess(self, u, v):
        huu = self._d2f(self.G, u) + np.zeros(np.broadcast(u, v).shape)
        hvv = self._d2f(self.F, v) + np.zeros(np.broadcast(u, v).shape)
        return huu, np.zeros_like(huu), hvv


def model_from_dict(spec: dict) -> HamiltonianModel:
    kind = spec.get("kind")
    if kind == "lane_emden":
        missing = [k for k in ("p", "q") if k not in spec]
        if missing:
            raise ConfigError(f"model: missing field {missing[0]!r}")
        return LaneEmden(float(spec["p"]), float(spec["q"]))
    if kind == "separable_powers":
        missing = [k for k in ("F", "G") if k not in spec]
        if missing:
            raise ConfigError(f"model: missing field {missing[0]!r}")
        return SeparablePowers(F=tuple(map(tuple, spec["F"])), G=tuple(map(tuple, spec["G"])))
    raise ConfigError(f"model: unknown kind {kind!r}")


# ----------------------------------------------------------------------------
# Operations


def eval_gradient(model: HamiltonianModel, u, v):
    """Return (H_u, H_v) at (u, v)."""
    return model.gradient(u, v)


def eval_hessian(model: HamiltonianModel, u, v):
    """Return (H_uu, H_uv, H_vv) at (u, v)."""
    return model.hessian(u, v)


@dataclass
class ConvexityReport:
    holds: bool
    worst_margin: float
    witness: tuple

    def to_dict(self):
        return {"holds": bool(self.holds), "worst_margin": float(self.worst_margin),
                "witness": [float(x) for x in self.witness]}


@dataclass
class CouplingReport:
    H1_holds: bool
    H2_holds: bool
    worst_margins: dict
    skipped: int
    n_checked: int

    def to_dict(self):
        return {"H1_holds": bool(self.H1_holds), "H2_holds": bool(self.H2_holds),
                "worst_margins": {k: float(v) for k, v in self.worst_margins.items()},
                "skipped": int(self.skipped), "n_checked": int(self.n_checked)}


def _sample_grid(sample_box, n_samples):
    (u0, u1), (v0, v1) = sample_box
    n = max(int(n_samples), 1)
    uu, vv = np.meshgrid(np.linspace(u0, u1, n), np.linspace(v0, v1, n), indexing="ij")
    return uu.ravel(), vv.ravel()


def check_convexity(model: HamiltonianModel, sample_box, n_samples: int = 41) -> ConvexityReport:
    """Scan an n_samples × n_samples grid for H_uu ≥ 0, H_vv ≥ 0 and det D²H ≥ 0."""
    u, v = _sample_grid(sample_box, n_samples)
    huu, huv, hvv = model.hessian(u, v)
    slack = np.minimum(np.minimum(huu, hvv), huu * hvv - huv**2)
    i = int(np.argmin(slack))
    return ConvexityReport(bool(slack[i] >= 0.0), float(slack[i]), (float(u[i]), float(v[i])))


def check_strong_coupling(model: HamiltonianModel, sample_box, n_samples: int = 41) -> CouplingReport:
    """Check the strict inequality chains of the strongly coupled case off the axes.

    H1: H_u/u > 0 and H_v/v > 0.
    H2: H_uu > (H_u - H_uv v)/u > 0 and H_vv > (H_v - H_uv u)/v > 0.
    """
    u, v = _sample_grid(sample_box, n_samples)
    keep = (u != 0) & (v != 0)
    skipped = int(np.count_nonzero(~keep))
    u, v = u[keep], v[keep]
    if u.size == 0:
        return CouplingReport(False, False, {"H1": np.nan, "H2": np.nan}, skipped, 0)
    hu, hv = model.gradient(u, v)
    huu, huv, hvv = model.hessian(u, v)
    h1 = np.minimum(hu / u, hv / v)
    xu = (hu - huv * v) / u
    xv = (hv - huv * u) / v
    h2 = np.minimum.reduce([huu - xu, xu, hvv - xv, xv])
    m1, m2 = float(h1.min()), float(h2.min())
    return CouplingReport(m1 > 0, m2 > 0, {"H1": m1, "H2": m2}, skipped, int(u.size))


@dataclass
class LinearizedPotentials:
    """Potentials of the decoupled scalar problems sampled along a solution.

    ``trace`` is H_uu + H_vv, the quantity written ΔH in the symmetrized system.
    """

    r: np.ndarray
    a: np.ndarray
    b: np.ndarray
    huu: np.ndarray
    huv: np.ndarray
    hvv: np.ndarray

    @property
    def trace(self):
        return self.huu + self.hvv


def potentials_from_hessian(huu, huv, hvv):
    """a = -(H_uu + H_vv)/2 - H_uv and b = (H_uu + H_vv)/2 - H_uv."""
    half = 0.5 * (huu + hvv)
    return -half - huv, half - huv


def potentials_along_solution(model: HamiltonianModel, sol, r=None) -> LinearizedPotentials:
    """Evaluate a, b and the Hessian along ``sol`` (on its own grid unless ``r`` is given)."""
    r = sol.r if r is None else np.asarray(r, dtype=float)
    u, v = sol.evaluate(r)[:2]
    huu, huv, hvv = model.hessian(u, v)
    a, b = potentials_from_hessian(huu, huv, hvv)
    return LinearizedPotentials(r, a, b, huu, huv, hvv)


def potential_function(model: HamiltonianModel, sol, which: str):
    """Callable r ↦ a(r) or b(r) for use on arbitrary spectral grids."""
    if which not in ("a", "b"):
        raise ValueError("which must be 'a' or 'b'")

    def c(r):
        u, v = sol.evaluate(np.asarray(r, dtype=float))[:2]
        a, b = potentials_from_hessian(*model.hessian(u, v))
        return a if which == "a" else b

    return c


def value_box(sol, pad: float = 0.0):
    """Sampling box covering the value range of a solution, for a-posteriori checks."""
    umax = float(np.max(np.abs(sol.u))) * (1 + pad)
    vmax = float(np.max(np.abs(sol.v))) * (1 + pad)
    return ((-umax, umax), (-vmax, vmax))
