import numpy as np
import pytest

from conftest import stub_solution
from morseham.errors import DegeneracyError
from morseham.nodal import NodalData, extract_nodal_data, interlacing_holds, interlacing_margin, verify_profile

TWO_PI = 2 * np.pi


def _sin_stub(shift=0.0):
    u = lambda r: np.sin(TWO_PI * r)
    du = lambda r: TWO_PI * np.cos(TWO_PI * r)
    v = lambda r: np.sin(TWO_PI * (r - shift))
    dv = lambda r: TWO_PI * np.cos(TWO_PI * (r - shift))
    return stub_solution(u, v, du, dv)


def test_sine_stub_zeros_and_critical_points():
    data = extract_nodal_data(_sin_stub())
    assert np.allclose(data.zeros_u, [0.5], atol=1e-10)
    assert np.allclose(data.critical_u, [0.25, 0.75], atol=1e-10)
    assert np.array_equal(data.zeros_u, data.zeros_v)
    assert list(data.signs_u) == [1, -1]
    assert verify_profile(data).passed


def test_shifted_sine_stub_fails_profile():
    rep = verify_profile(extract_nodal_data(_sin_stub(0.3)))
    assert not rep.passed
    assert any(not c.passed for c in rep.checks)


def test_critical_point_outside_intersection_fails_check_iv():
    data = NodalData(0.0, 1.0, np.array([0.5]), np.array([0.6]), np.array([0.0, 0.55]), np.array([0.0, 0.8]),
                     np.array([1, -1]), np.array([1, -1]))
    rep = verify_profile(data)
    assert not rep["critical_points_in_intersection"].passed
    assert rep["critical_points_in_intersection"].margin == pytest.approx(-0.05)
    for name in ("equal_zone_count", "first_zone_same_sign", "zones_intersect", "one_critical_point_per_zone"):
        assert rep[name].passed


def test_grazing_zero_is_degenerate():
    u = lambda r: (r - 0.5) ** 2
    du = lambda r: 2 * (r - 0.5)
    with pytest.raises(DegeneracyError):
        extract_nodal_data(stub_solution(u, u, du, du))


def test_positive_solution_profile(le33_m1):
    data = extract_nodal_data(le33_m1)
    assert data.zeros_u.size == 0 and data.zeros_v.size == 0
    assert data.critical_u.tolist() == [0.0] and data.critical_v.tolist() == [0.0]
    rep = verify_profile(data)
    assert rep.passed and len(rep.checks) == 5


def test_two_zone_profile(le33_m2, le23_m2):
    for sol in (le33_m2, le23_m2):
        data = extract_nodal_data(sol)
        assert data.m == data.n == 2
        assert verify_profile(data).passed
        assert interlacing_holds(data) and interlacing_margin(data) > 0
    d = extract_nodal_data(le23_m2)
    # the zones of u and v are offset when p ≠ q
    assert abs(d.zeros_u[0] - d.zeros_v[0]) > 1e-6


def test_report_serialization(le33_m2):
    rep = verify_profile(extract_nodal_data(le33_m2)).to_dict()
    assert rep["pass"] is True
    assert [c["name"] for c in rep["checks"]] == ["equal_zone_count", "first_zone_same_sign", "zones_intersect",
                                                  "critical_points_in_intersection",
                                                  "one_critical_point_per_zone"]
