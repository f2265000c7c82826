import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morseham.errors import AmbiguityError, DomainError
from morseham.geometry import DomainSpec
from morseham.hamiltonian import potential_function
from morseham.morse import (AngularData, angular_cutoff, angular_cutoff_closed_form, beltrami_eigenvalue,
                            beltrami_multiplicity, build_report, full_morse_index, radial_morse_index,
                            verify_theorem_bounds)


def _harmonic_dimension(j, N):
    """dim of degree-j harmonic polynomials in N variables: dim P_j - dim P_{j-2}."""
    below = math.comb(N + j - 3, j - 2) if j >= 2 else 0
    return math.comb(N + j - 1, j) - below


def test_beltrami_values():
    assert beltrami_eigenvalue(0, 5) == 0
    assert beltrami_eigenvalue(1, 3) == 2
    assert beltrami_eigenvalue(2, 4) == 8
    assert beltrami_multiplicity(0, 7) == 1
    assert beltrami_multiplicity(1, 3) == 3 and beltrami_multiplicity(2, 3) == 5
    assert beltrami_multiplicity(3, 4) == 16
    assert AngularData.of(2, 3) == AngularData(2, 6, 5)


def test_multiplicity_equals_harmonic_dimension():
    for N in range(2, 11):
        for j in range(31):
            assert beltrami_multiplicity(j, N) == _harmonic_dimension(j, N)


def test_multiplicity_is_exact_for_large_degree():
    assert beltrami_multiplicity(200, 40) == _harmonic_dimension(200, 40)


def test_invalid_arguments():
    with pytest.raises(DomainError):
        beltrami_eigenvalue(-1, 3)
    with pytest.raises(DomainError):
        beltrami_multiplicity(1, 1)
    with pytest.raises(DomainError):
        angular_cutoff(0.0, 3)


def test_cutoff_examples():
    c = angular_cutoff(-2.0, 3)
    assert c.M == 0 and not c.exact  # λ_1 + Λ̂ = 0 is a tie
    assert angular_cutoff_closed_form(-2.0, 3) == 0
    assert angular_cutoff(-2.5, 3).M == 1
    assert angular_cutoff(-1e-3, 3).M == 0


@settings(max_examples=300, deadline=None)
@given(st.floats(-500, -1e-6, allow_nan=False), st.integers(2, 10))
def test_cutoff_monotone_and_consistent(lam, N):
    c = angular_cutoff(lam, N)
    if c.exact:
        assert c.M == c.closed_form
    assert angular_cutoff(lam - 1.0, N).M >= c.M


def test_closed_form_agrees_with_enumeration_on_many_samples():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 10_000:
        N = int(rng.integers(2, 11))
        lam = -float(rng.uniform(1e-6, 400))
        c = angular_cutoff(lam, N)
        if not c.exact:
            continue
        assert c.M == c.closed_form
        checked += 1


def test_full_index_examples():
    assert full_morse_index([-2.5], 3)["m_lin"] == 4
    assert full_morse_index([-0.1], 3)["m_lin"] == 1
    assert full_morse_index([], 3)["m_lin"] == 0
    out = full_morse_index([-2.5, -0.1], 3, m_lin_rad=2)
    assert out["m_lin"] == 5 and out["m_lin_prop12"] == 7 and out["j0_total"] == 2
    assert [c.M_k for c in out["contributions"]] == [1, 0]


def test_full_index_refuses_ambiguous_input():
    with pytest.raises(AmbiguityError):
        full_morse_index([-2.0], 3)
    with pytest.raises(AmbiguityError):
        full_morse_index([-1e-12], 3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-300, -1e-3, allow_nan=False), max_size=5), st.integers(2, 8))
def test_index_at_least_number_of_eigenvalues(lams, N):
    try:
        out = full_morse_index(lams, N)
    except AmbiguityError:
        return
    assert out["m_lin"] >= len(lams)
    assert sum(c.total for c in out["contributions"]) == out["m_lin"]


def test_theorem_flags():
    rep = build_report(2, 3, 2, [-8.5, -1.98])
    assert rep.m_lin == (1 + 3 + 5) + 1  # M = 2 for -8.5, M = 0 for -1.98
    assert rep.flags["uno"]["holds"] and rep.flags["due"]["holds"] and rep.flags["tre"]["holds"]
    assert rep.flags["tre"]["margin"] == pytest.approx(6.5)
    bad = build_report(2, 3, 1, [-1.5])
    assert not bad.flags["uno"]["holds"] and not bad.flags["due"]["holds"]
    assert bad.flags["tre"]["holds"] is False and bad.flags["tre"]["margin"] == pytest.approx(-0.5)
    m1 = build_report(1, 2, 1, [-0.3])
    assert m1.flags["tre"]["holds"] is None and m1.flags["due"]["margin"] == 0
    assert verify_theorem_bounds(m1, 2) == m1.flags


def test_radial_index_of_solutions(le33, le33_m1, le33_m2):
    dom = le33_m1.domain
    assert radial_morse_index(potential_function(le33, le33_m1, "a"), dom, 1024) == 1
    assert radial_morse_index(potential_function(le33, le33_m2, "a"), dom, 1024) >= 2
    assert radial_morse_index(None, dom, 256) == 0
