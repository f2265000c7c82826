import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh

from morseham.geometry import DomainSpec
from morseham.hamiltonian import potential_function
from morseham.spectra import (SpectralProblem, assemble_discretization, count_negative, eigen_solve, inertia_report,
                              regular_radial_eigenvalues, singular_radial_eigenvalues, sturm_count)

PI2 = np.pi**2


def _dense_eigs(problem):
    A, B = assemble_discretization(problem).dense()
    return eigh(A, B, eigvals_only=True)


def test_one_dimensional_second_difference():
    M = 401
    prob = SpectralProblem(1, np.linspace(0, 1, M), None, "regular", "dirichlet")
    pen = assemble_discretization(prob)
    h = 1 / (M - 1)
    assert np.allclose(pen.d, 2 / h) and np.allclose(pen.e, -1 / h) and np.allclose(pen.B, h)
    lam = eigen_solve(prob, 3).eigenvalues
    assert np.allclose(lam, PI2 * np.arange(1, 4) ** 2, rtol=1e-6)


def test_pencil_is_symmetric_with_positive_mass():
    prob = SpectralProblem.regular(DomainSpec(3, 1.0), lambda r: np.cos(5 * r), 64)
    A, B = assemble_discretization(prob).dense()
    assert np.array_equal(A, A.T)
    assert np.all(np.diag(B) > 0)
    sing = SpectralProblem.singular(DomainSpec(4, 1.0), None, 64)
    assert np.all(assemble_discretization(sing).B > 0)


@pytest.mark.parametrize("domain, exact", [
    (DomainSpec(3, 1.0), lambda k: (k * np.pi) ** 2),
    (DomainSpec(3, 1.0, 0.5), lambda k: (2 * k * np.pi) ** 2),
])
def test_closed_form_spectra(domain, exact):
    spec = regular_radial_eigenvalues(None, domain, 5, 2048)
    k = np.arange(1, 6)
    assert np.max(np.abs(spec.eigenvalues / exact(k) - 1)) <= 1e-6
    assert np.all(spec.error_estimates < 1e-3 * spec.eigenvalues)


def test_second_order_convergence():
    dom = DomainSpec(3, 1.0)
    errs = [abs(eigen_solve(SpectralProblem.regular(dom, None, M), 1, richardson=False).eigenvalues[0] - PI2)
            for M in (257, 513)]
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_potential_shift_is_exact():
    dom = DomainSpec(3, 1.0)
    prob = SpectralProblem.regular(dom, lambda r: 10 * r**2, 300)
    base = eigen_solve(prob, 4, richardson=False).eigenvalues
    shifted = eigen_solve(prob.shifted(7.5), 4, richardson=False).eigenvalues
    assert np.allclose(shifted - base, 7.5, atol=1e-9)


def test_negative_counts():
    dom = DomainSpec(3, 1.0)
    assert count_negative(SpectralProblem.regular(dom, None, 512)) == 0
    assert count_negative(SpectralProblem.regular(dom, -2 * PI2, 512)) == 1
    rep = inertia_report(SpectralProblem.regular(dom, -2 * PI2, 512))
    assert rep["stable"] and rep["count_refined"] == 1


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-80, 80, allow_nan=False), min_size=3, max_size=3), st.floats(-50, 50))
def test_sturm_count_matches_dense_eigensolver(coef, shift):
    c = lambda r: coef[0] + coef[1] * np.cos(3 * r) + coef[2] * r**2
    prob = SpectralProblem.regular(DomainSpec(3, 1.0, 0.2), c, 60)
    eigs = _dense_eigs(prob)
    if np.min(np.abs(eigs - shift)) < 1e-8:
        return
    assert sturm_count(assemble_discretization(prob), shift)[0][0] == np.count_nonzero(eigs < shift)


def test_eigen_solve_agrees_with_dense_solver():
    prob = SpectralProblem.regular(DomainSpec(2, 1.0), lambda r: -60 * np.exp(-r), 120)
    ours = eigen_solve(prob, 4, richardson=False).eigenvalues
    assert np.allclose(ours, _dense_eigs(prob)[:4], rtol=1e-10, atol=1e-9)


def test_hardy_floor_zero_potential():
    for N in (3, 4):
        theta = ((N - 2) / 2) ** 2
        spec = singular_radial_eigenvalues(None, DomainSpec(N, 1.0))
        assert spec.eigenvalues.size == 0
        raw = [eigen_solve(SpectralProblem.singular(DomainSpec(N, 1.0), None, 1024, eps), 1).eigenvalues[0]
               for eps in (1e-2, 1e-3, 1e-4)]
        assert raw[0] > raw[1] > raw[2] > theta - 1e-6


def test_constant_negative_potential_has_bound_state():
    dom = DomainSpec(3, 1.0)
    spec = singular_radial_eigenvalues(-60.0, dom)
    assert spec.eigenvalues.size >= 1 and spec.eigenvalues[0] < 0
    assert spec.meta["at_epsilon_half"][0] <= spec.meta["at_epsilon"][0]


def test_annulus_singular_problem_needs_no_cutoff():
    spec = singular_radial_eigenvalues(-200.0, DomainSpec(3, 1.0, 0.5))
    assert spec.eigenvalues.size >= 1
    assert "epsilon_half" not in spec.meta


def test_solution_spectra(le33, le33_m1, le33_m2):
    dom = le33_m1.domain
    for m, sol in ((1, le33_m1), (2, le33_m2)):
        a = potential_function(le33, sol, "a")
        b = potential_function(le33, sol, "b")
        reg = regular_radial_eigenvalues(a, dom, m + 2, 1024, vectors=True)
        assert reg.negative_count >= m
        assert reg.negative_count == reg.meta["inertia"]["count"]
        assert regular_radial_eigenvalues(b, dom, 2, 1024).negative_count == 0
        sing = singular_radial_eigenvalues(a, dom, 1024)
        assert sing.eigenvalues.size == reg.negative_count
        # the k-th negative eigenfunction has exactly k nodal zones, and eigenvalues are simple
        for k in range(reg.negative_count):
            vec = reg.eigenvectors[:-1, k]
            s = np.sign(vec[np.abs(vec) > 1e-8 * np.max(np.abs(vec))])
            assert np.count_nonzero(s[1:] != s[:-1]) == k
        assert np.all(np.diff(reg.eigenvalues) > 1e-6)
    assert count_negative(SpectralProblem.regular(dom, potential_function(le33, le33_m1, "a"), 1024)) == 1
    sing2 = singular_radial_eigenvalues(potential_function(le33, le33_m2, "a"), dom)
    assert sing2.eigenvalues[0] < -2.0


def test_spectrum_rows_and_dict():
    spec = regular_radial_eigenvalues(None, DomainSpec(3, 1.0), 2, 256)
    rows = list(spec.rows())
    assert [r[0] for r in rows] == [1, 2]
    d = spec.to_dict()
    assert d["negative_count"] == 0 and d["hardy_threshold"] == 0.25
