"""Acceptance criteria 1-11, one test per criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from morseham.geometry import DomainSpec
from morseham.morse import angular_cutoff, beltrami_multiplicity
from morseham.nodal import extract_nodal_data, interlacing_margin, verify_profile
from morseham.oracle import (decoupling_check, default_grid, derivative_pair_residual, quad_form_action,
                             quad_form_lin, random_test_functions, test_function_estimates as estimates)
from morseham.spectra import regular_radial_eigenvalues, singular_radial_eigenvalues

M = 2048


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def _reports(sweep_result):
    return [(r["p"], r["q"], r["N"], r["m"], r["report"]) for r in sweep_result["rows"]]


def test_criterion_01_closed_form_spectra(verdict):
    t0 = time.perf_counter()
    k = np.arange(1, 6)
    ball = regular_radial_eigenvalues(None, DomainSpec(3, 1.0), 5, M).eigenvalues
    ann = regular_radial_eigenvalues(None, DomainSpec(3, 1.0, 0.5), 5, M).eigenvalues
    dt = time.perf_counter() - t0
    e1 = float(np.max(np.abs(ball / (k * np.pi) ** 2 - 1)))
    e2 = float(np.max(np.abs(ann / (2 * k * np.pi) ** 2 - 1)))
    verdict(1, e1 <= 1e-6 and e2 <= 1e-6 and dt < 5.0,
            f"ball rel err {e1:.2e}, annulus rel err {e2:.2e}, {dt:.2f} s")


def test_criterion_02_decoupling(verdict, le33_m1, le33_m2):
    dev, anti = 0.0, 0.0
    for sol in (le33_m1, le33_m2):
        d = decoupling_check(sol, "regular", 6, M)
        dev = max(dev, d["union_max_deviation"])
        anti = max(anti, d["max_antisymmetric_part"])
    verdict(2, dev <= 1e-8 and anti <= 1e-6, f"union deviation {dev:.2e}, max |phi-psi|/|phi| {anti:.2e}")


def test_criterion_03_convexity_consequence(verdict, default_sweep):
    worst_b, worst_neg = math.inf, 0
    for *_, rep in _reports(default_sweep):
        assert rep["solution"]["convexity"]["holds"]
        worst_b = min(worst_b, rep["spectra"]["b_min"])
        worst_neg = max(worst_neg, rep["spectra"]["regular_b"]["negative_count"])
    verdict(3, worst_b >= -1e-12 and worst_neg == 0, f"min b {worst_b:.3e}, max negative b-eigenvalues {worst_neg}")


def test_criterion_04_count_consistency(verdict, default_sweep):
    mismatch = []
    for p, q, N, m, rep in _reports(default_sweep):
        reg = rep["morse"]["m_lin_rad"]
        sing = sum(1 for x in rep["spectra"]["singular_a"]["eigenvalues"] if x < -1e-10)
        if reg != sing:
            mismatch.append((p, q, N, m, reg, sing))
    n = len(default_sweep["rows"])
    verdict(4, n == 8 and not mismatch, f"{n} runs, mismatches {mismatch}")


def test_criterion_05_index_bounds(verdict, default_sweep):
    bad, tre_margins = [], []
    for p, q, N, m, rep in _reports(default_sweep):
        mo = rep["morse"]
        ok = mo["m_lin_rad"] >= m and mo["m_lin"] >= mo["m_lin_rad"] + (m - 1) * N >= m + (m - 1) * N
        if m == 2:
            lam1 = sorted(mo["singular_a"])[0]
            tre_margins.append(-(N - 1) - lam1)
            ok = ok and lam1 < -(N - 1)
        # the report's own flags must agree with the independent recomputation
        ok = ok and all(mo["flags"][k]["holds"] in (True, None) for k in ("uno", "due", "tre"))
        if not ok:
            bad.append((p, q, N, m))
    secs = default_sweep["seconds"]
    verdict(5, not bad and secs < 300 and min(tre_margins) > 0,
            f"violations {bad}, min tre margin {min(tre_margins):.3f}, sweep {secs:.1f} s")


def test_criterion_06_profile(verdict, default_sweep, le33_m1, le33_m2, le23_m2):
    failed, margins = [], []
    for p, q, N, m, rep in _reports(default_sweep):
        if not rep["profile"]["pass"]:
            failed.append((p, q, N, m))
        margins.append(rep["profile"]["interlacing_margin"])
    for sol in (le33_m1, le33_m2, le23_m2):
        data = extract_nodal_data(sol)
        if not verify_profile(data).passed:
            failed.append(sol.model.to_dict())
        margins.append(interlacing_margin(data))
    verdict(6, not failed and min(margins) > 0, f"failed {failed}, min interlacing margin {min(margins):.4f}")


def test_criterion_07_quadratic_identities(verdict, le33_m1, le33_m2, le23_m2):
    worst = 0.0
    for sol in (le33_m1, le33_m2, le23_m2):
        g = default_grid(sol, M)
        fs = random_test_functions(g, 20)
        assert len(fs) == 20
        for f in fs:
            ql, qi = quad_form_lin(sol, f, f, g), quad_form_action(sol, f, f, g)
            worst = max(worst, abs(ql - qi) / abs(ql))
            ql, qi = quad_form_lin(sol, f, -f, g), quad_form_action(sol, f, -f, g)
            worst = max(worst, abs(ql + qi) / abs(ql))
    verdict(7, worst <= 1e-10, f"max relative deviation {worst:.2e}")


def test_criterion_08_combinatorics(verdict):
    mism = [(N, j) for N in range(2, 11) for j in range(31)
            if beltrami_multiplicity(j, N) != math.comb(N + j - 1, j) - (math.comb(N + j - 3, j - 2) if j >= 2 else 0)]
    rng = np.random.default_rng(20240611)
    checked = disagree = 0
    while checked < 10_000:
        N, lam = int(rng.integers(2, 11)), -float(rng.uniform(1e-6, 300))
        c = angular_cutoff(lam, N)
        if c.exact:
            checked += 1
            disagree += c.M != c.closed_form
    verdict(8, not mism and disagree == 0, f"N_j mismatches {len(mism)}, cutoff disagreements {disagree}/{checked}")


def test_criterion_09_derivative_identity(verdict, le33_m1, le33_m2):
    parts, ok = [], True
    for m, sol in ((1, le33_m1), (2, le33_m2)):
        coarse, fine = derivative_pair_residual(sol, levels=0), derivative_pair_residual(sol, levels=1)
        ratio = coarse / fine
        ok = ok and fine <= 1e-5 and 3.0 <= ratio <= 5.0
        parts.append(f"m={m}: {fine:.2e} (ratio {ratio:.2f})")
    verdict(9, ok, ", ".join(parts))


def test_criterion_10_test_function_estimates(verdict, le33_m1, le33_m2, le23_m2):
    worst_nodal, worst_deriv, ok = -math.inf, -math.inf, True
    for sol in (le33_m1, le33_m2, le23_m2):
        rep = estimates(sol, tol=1e-8)
        ok = ok and rep.nodal_holds and rep.derivative_holds
        worst_nodal = max(worst_nodal, max(e["Q_lin"] for e in rep.nodal))
        if rep.derivative:
            worst_deriv = max(worst_deriv, max(e["margin"] for e in rep.derivative))
    verdict(10, ok, f"max Q_lin(u_i,v_i) {worst_nodal:.3e}, max normalized derivative margin {worst_deriv:.2e}")


def test_criterion_11_hardy_floor(verdict):
    parts, ok = [], True
    for N in (3, 4):
        theta = ((N - 2) / 2) ** 2
        dom = DomainSpec(N, 1.0)
        spec = singular_radial_eigenvalues(None, dom, M, epsilon=1e-4)
        floor = spec.meta["floor"]
        rel = abs(floor["extrapolated"] - theta) / theta
        raw = [singular_radial_eigenvalues(None, dom, M, epsilon=e).meta["floor"]["raw"]
               for e in (1e-2, 1e-3, 1e-4)]
        mono = raw[0] > raw[1] > raw[2]
        ok = ok and spec.eigenvalues.size == 0 and rel <= 0.02 and mono
        parts.append(f"N={N}: list {spec.eigenvalues.tolist()}, floor {floor['extrapolated']:.6f} "
                     f"(rel {rel:.1e}; raw cutoff value {floor['raw']:.4f}), monotone {mono}")
    verdict(11, ok, "; ".join(parts))
