import time

import numpy as np
import pytest

from morseham.geometry import DomainSpec
from morseham.hamiltonian import HamiltonianModel, LaneEmden
from morseham.harness import sweep
from morseham.shooting import RadialSolution, find_solution


class ProductStub(HamiltonianModel):
    """H = u v: indefinite Hessian, violates convexity everywhere."""

    kind = "stub_product"

    def _H(self, u, v):
        return u * v

    def _grad(self, u, v):
        return v, u

    def _hess(self, u, v):
        one = np.ones_like(np.asarray(u, dtype=float) + np.asarray(v, dtype=float))
        return 0.0 * one, one, 0.0 * one

    def to_dict(self):
        return {"kind": self.kind}


class QuarticCouplingStub(HamiltonianModel):
    """H = u²v²/2, strongly coupled through H_uv."""

    kind = "stub_quartic"

    def _H(self, u, v):
        return 0.5 * u**2 * v**2

    def _grad(self, u, v):
        return u * v**2, u**2 * v

    def _hess(self, u, v):
        return v**2, 2.0 * u * v, u**2

    def to_dict(self):
        return {"kind": self.kind}


def stub_solution(u, v, du, dv, domain=None, model=None):
    """RadialSolution built from closed-form callables."""
    domain = domain or DomainSpec(3, 1.0)
    model = model or LaneEmden(3, 3)
    dense = lambda x: (u(x), v(x), du(x), dv(x))
    return RadialSolution.from_dense(domain, model, dense, float(u(0.0)), float(v(0.0)), 2048, method="stub")


@pytest.fixture(scope="session")
def ball3():
    return DomainSpec(3, 1.0)


@pytest.fixture(scope="session")
def le33():
    return LaneEmden(3, 3)


@pytest.fixture(scope="session")
def le33_m1(le33, ball3):
    return find_solution(le33, ball3, 1)


@pytest.fixture(scope="session")
def le33_m2(le33, ball3):
    return find_solution(le33, ball3, 2)


@pytest.fixture(scope="session")
def le23_m2(ball3):
    return find_solution(LaneEmden(2, 3), ball3, 2)


@pytest.fixture(scope="session")
def default_sweep(tmp_path_factory):
    """The default diagonal sweep p = q ∈ {2, 3}, N ∈ {2, 3}, m ∈ {1, 2}, with timing."""
    base = {"model": {"kind": "lane_emden", "p": 2, "q": 2}, "domain": {"shape": "ball", "N": 2},
            "tasks": ["solve", "profile", "spectrum", "morse", "verify"]}
    out = tmp_path_factory.mktemp("sweep")
    t0 = time.perf_counter()
    rows, summary = sweep(base, {"p": [2, 3], "N": [2, 3], "m": [1, 2]}, out)
    return {"rows": rows, "summary": summary, "seconds": time.perf_counter() - t0}
