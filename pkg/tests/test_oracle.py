import numpy as np
import pytest

from conftest import ProductStub, stub_solution
from morseham.geometry import DomainSpec
from morseham.hamiltonian import LaneEmden
from morseham.oracle import (assemble_coupled, block_sturm_count, coupled_spectrum, decoupling_check, default_grid,
                             derivative_pair_residual, quad_form_action, quad_form_lin, random_test_functions,
                             test_function_estimates as estimates)
from morseham.spectra import SpectralProblem, assemble_discretization, eigen_solve

M = 1024


def _zero_solution(domain=None):
    z = lambda r: np.zeros_like(np.asarray(r, dtype=float))
    return stub_solution(z, z, z, z, domain=domain)


def test_zero_potentials_double_the_scalar_spectrum():
    sol = _zero_solution()
    cs = coupled_spectrum(sol, "regular", 6, 256)
    scalar = eigen_solve(SpectralProblem.regular(sol.domain, None, 256), 3, richardson=False).eigenvalues
    assert np.allclose(cs.eigenvalues, np.repeat(scalar, 2), rtol=1e-10)


def test_block_sturm_count_matches_dense_pencil(le23_m2):
    cp = assemble_coupled(le23_m2, "regular", 80)
    n = cp.n
    A = np.zeros((2 * n, 2 * n))
    for i in range(n):
        A[2 * i, 2 * i] = A[2 * i + 1, 2 * i + 1] = cp.d[i]
        A[2 * i, 2 * i + 1] = A[2 * i + 1, 2 * i] = cp.y[i]
        if i + 1 < n:
            for c in (0, 1):
                A[2 * i + c, 2 * (i + 1) + c] = A[2 * (i + 1) + c, 2 * i + c] = cp.e[i]
    B = np.repeat(cp.B, 2)
    eigs = np.linalg.eigvalsh(A / np.sqrt(np.outer(B, B)))
    shifts = np.array([-5e3, -100.0, 0.0, 50.0, 1e3])
    assert np.array_equal(block_sturm_count(cp, shifts), [np.count_nonzero(eigs < s) for s in shifts])


@pytest.mark.parametrize("weight", ["regular", "singular"])
def test_decoupling_is_exact(le33_m2, weight):
    d = decoupling_check(le33_m2, weight, 6, M)
    assert d["union_max_deviation"] <= 1e-8 * max(1.0, abs(d["coupled"][0]))
    assert d["block_max_deviation"] <= 1e-14 * max(1.0, np.max(np.abs(assemble_discretization(
        SpectralProblem.regular(le33_m2.domain, None, M)).d)))
    assert d["max_antisymmetric_part"] <= 1e-6
    assert d["b_smallest"] >= -1e-10


def test_negative_coupled_count_equals_radial_index(le23_m2):
    d = decoupling_check(le23_m2, "regular", 6, M)
    a_neg = sum(1 for x in d["a"] if x < 0)
    assert d["negative_count"] == a_neg >= 2


def test_quadratic_form_identities(le23_m2):
    g = default_grid(le23_m2, M)
    for f in random_test_functions(g, 20):
        ql, qi = quad_form_lin(le23_m2, f, f, g), quad_form_action(le23_m2, f, f, g)
        assert abs(ql - qi) <= 1e-10 * abs(ql)
        ql, qi = quad_form_lin(le23_m2, f, -f, g), quad_form_action(le23_m2, f, -f, g)
        assert abs(ql + qi) <= 1e-10 * abs(ql)


def test_test_functions_are_deterministic_and_satisfy_dirichlet():
    g = SpectralProblem.regular(DomainSpec(3, 1.0, 0.4), None, 100).grid
    a, b = random_test_functions(g, 3), random_test_functions(g, 3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert all(abs(f[0]) < 1e-14 and abs(f[-1]) < 1e-14 for f in a)


def test_rayleigh_identity(le33_m1):
    cs = coupled_spectrum(le33_m1, "regular", 1, M, vectors=True)
    phi, psi = cs.phi[:, 0], cs.psi[:, 0]
    q = quad_form_lin(le33_m1, phi, psi, cs.grid)
    mass = cs.pencil.mass(phi[cs.nodes], psi[cs.nodes])
    assert abs(q - cs.eigenvalues[0] * mass) <= 1e-8 * abs(q)


def test_derivative_identity_converges(le33_m1, le33_m2):
    for sol in (le33_m1, le33_m2):
        r1, r2 = derivative_pair_residual(sol, levels=0), derivative_pair_residual(sol, levels=1)
        assert r2 <= 1e-5
        assert 3.0 < r1 / r2 < 5.0


def test_derivative_identity_zero_solution():
    assert derivative_pair_residual(_zero_solution()) == 0.0


def test_derivative_identity_detects_corruption(le33_m1):
    base = derivative_pair_residual(le33_m1)
    scale = float(np.max(np.abs(le33_m1.du)))

    def dense(x):
        u, v, du, dv = le33_m1.evaluate(x)
        return u, v, du + 1e-3 * scale * np.sin(3 * np.asarray(x)), dv

    bad = type(le33_m1).from_dense(le33_m1.domain, le33_m1.model, dense, le33_m1.alpha, le33_m1.beta)
    assert derivative_pair_residual(bad) >= base + 1e-4


def test_estimates_two_zones(le33_m2, le23_m2):
    for sol in (le33_m2, le23_m2):
        rep = estimates(sol)
        assert len(rep.nodal) == 2 and rep.nodal_holds
        assert len(rep.derivative) == 1 and rep.derivative_holds
        d = rep.derivative[0]
        assert d["Q_lin"] < 0 and d["hardy"] > 0


def test_estimates_single_zone(le33_m1):
    rep = estimates(le33_m1)
    assert len(rep.nodal) == 1 and rep.nodal[0]["Q_lin"] < 0 and rep.derivative == []


def test_estimates_negative_control(le33_m2):
    # the indefinite stub model reverses the potential terms; the report records whatever comes out
    rep = estimates(le33_m2, model=ProductStub())
    assert len(rep.nodal) == 2 and isinstance(rep.nodal_holds, bool)
