"""Radial domains and the deterministic radial grids shared by all solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError

# inner cutoff for singular-weight problems on a ball, relative to R
DEFAULT_EPSILON = 1e-4
DEFAULT_RATIO = 1.02


@dataclass(frozen=True)
class DomainSpec:
    """A ball {|x| < R} or an annulus {δ < |x| < R} in dimension N."""

    N: int
    R: float = 1.0
    delta: Optional[float] = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise DomainError(f"dimension N must be an integer >= 2, got {self.N}")
        if not (math.isfinite(self.R) and self.R > 0):
            raise DomainError(f"R must be finite and positive, got {self.R}")
        if self.delta is not None and not (0 < self.delta < self.R):
            raise DomainError(f"annulus needs 0 < delta < R, got delta={self.delta}, R={self.R}")

    @property
    def shape(self) -> str:
        return "ball" if self.delta is None else "annulus"

    @property
    def is_ball(self) -> bool:
        return self.delta is None

    @property
    def r_in(self) -> float:
        return 0.0 if self.delta is None else float(self.delta)

    @property
    def hardy_threshold(self) -> float:
        return ((self.N - 2) / 2.0) ** 2

    def to_dict(self):
        d = {"shape": self.shape, "N": int(self.N), "R": float(self.R)}
        if self.delta is not None:
            d["delta"] = float(self.delta)
        return d

    @classmethod
    def from_dict(cls, spec: dict) -> "DomainSpec":
        shape = spec.get("shape", "ball")
        if "N" not in spec:
            raise ConfigError("domain: missing field 'N'")
        N, R = int(spec["N"]), float(spec.get("R", 1.0))
        if shape == "ball":
            return cls(N, R)
        if shape == "annulus":
            if "delta" not in spec:
                raise ConfigError("domain: missing field 'delta'")
            return cls(N, R, float(spec["delta"]))
        raise ConfigError(f"domain: unknown shape {shape!r}")


def radial_grid(r_in: float, R: float, M: int, ratio: float = DEFAULT_RATIO) -> np.ndarray:
    """M nodes on [r_in, R]: geometric (spacing (ratio-1)·r) near r_in, uniform beyond.

    With r_in = 0 the grid is uniform.  The geometric part is log-uniform, which
    is the natural resolution for the r^{N-3} weight near a small cutoff.
    """
    if M < 3:
        raise DomainError("a radial grid needs at least 3 nodes")
    if not r_in < R:
        raise DomainError("radial grid needs r_in < R")
    if r_in <= 0 or ratio <= 1.0:
        return np.linspace(r_in, R, M)
    g = ratio - 1.0
    # smallest number K of geometric steps after which the geometric spacing
    # reaches the uniform spacing of the remainder
    K = 0
    while K < M - 2:
        rk = r_in * ratio**K
        if rk * g >= (R - rk) / (M - 1 - K):
            break
        K += 1
    geo = r_in * ratio ** np.arange(K + 1)
    uni = np.linspace(geo[-1], R, M - K)
    return np.concatenate([geo[:-1], uni])


def extended_cutoff_grid(grid: np.ndarray, ratio: float = DEFAULT_RATIO, factor: float = 2.0):
    """Prepend geometric nodes so the inner cutoff shrinks by ≈ ``factor``.

    Returns (new_grid, exact_factor).  Nodes above the old cutoff are unchanged,
    which keeps discretizations on the two grids identical away from the cutoff.
    """
    k = max(1, int(round(math.log(factor) / math.log(ratio))))
    extra = grid[0] * ratio ** -np.arange(k, 0, -1, dtype=float)
    return np.concatenate([extra, grid]), ratio**k


def refine(grid: np.ndarray) -> np.ndarray:
    """Bisect every interval (2M - 1 nodes)."""
    mid = 0.5 * (grid[1:] + grid[:-1])
    out = np.empty(2 * grid.size - 1)
    out[0::2] = grid
    out[1::2] = mid
    return out


def solution_grid(domain: DomainSpec, M: int = 2048, ratio: float = DEFAULT_RATIO) -> np.ndarray:
    """Output grid for solution profiles: clustered near the origin on a ball."""
    if domain.is_ball:
        return np.concatenate([[0.0], radial_grid(DEFAULT_EPSILON * domain.R, domain.R, M - 1, ratio)])
    return radial_grid(domain.r_in, domain.R, M, ratio)
