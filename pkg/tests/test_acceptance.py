"""Acceptance gate: one test per criterion, each at its stated tolerance."""

import math
import numpy as np
import pytest

from bgpwaves import kpp, mfg, verify
from bgpwaves.alpha import Power
from bgpwaves.errors import NoWave
from bgpwaves.mfg import Classification as C

TOP = 2.0  # logistic kernel 2/(1+e^x)


@pytest.fixture(scope="module")
def family_22(logistic):
    crit = kpp.critical_wave(logistic, 2.2)
    thetas = [crit.theta] + list(np.linspace(crit.theta, 0.95, 5)[1:])
    return kpp.wave_family(logistic, 2.2, thetas)


@pytest.fixture(scope="module")
def family_3(logistic):
    return kpp.wave_family(logistic, 3.0, [0.1, 0.5, 0.9])


def test_criterion_01_classical_reduction(unit_kernel, record_criterion):
    ws = kpp.solve_wave(unit_kernel, 2.5, 0.3)
    rel_i = abs(ws.i_value - 1.0)
    lam_err = abs(ws.lam - 0.5)
    try:
        kpp.solve_wave(unit_kernel, 1.9, 0.3)
        no_wave = False
    except NoWave:
        no_wave = True
    ok = rel_i <= 1e-6 and lam_err <= 1e-3 and no_wave
    record_criterion(1, ok, f"|I-1|={rel_i:.2e} (<=1e-6), |lambda-0.5|={lam_err:.2e} (<=1e-3), "
                            f"NoWave at c=1.9: {no_wave}")
    assert ok


def test_criterion_02_foliation(family_22, family_3, record_criterion):
    fr = family_22
    theta_c = fr.theta_c
    in_range = theta_c is not None and 0 < theta_c < 1
    waves = fr.waves
    ordered = all(w is not None for w in waves) and all(
        np.all(a.w.values < b.w.values) for a, b in zip(waves, waves[1:]))
    full = all(w is not None for w in family_3.waves)
    ok = in_range and ordered and full
    record_criterion(2, ok, f"theta_c={theta_c:.6f} in (0,1), 5 heights strictly ordered: "
                            f"{ordered}, c=3 heights 0.1/0.5/0.9 exist: {full}")
    assert ok


def test_criterion_03_criticality(family_22, record_criterion):
    fr = family_22
    crit = fr.critical
    gap = abs(crit.i_value - 1.21)
    i = np.array(fr.i_values, dtype=float)
    decreasing = bool(np.all(np.diff(i) < 0))
    fit_ok = crit.tail_degree == 1 and abs(crit.lam - 1.1) <= 1e-2
    ok = gap <= 1e-3 and decreasing and fit_ok
    record_criterion(3, ok, f"|I(w_c)-1.21|={gap:.2e} (<=1e-3), I decreasing: {decreasing}, "
                            f"tail degree {crit.tail_degree} rate {crit.lam:.4f} (1.1+-1e-2)")
    assert ok


def test_criterion_04_height_bounds(logistic, family_22, record_criterion):
    x_hat = logistic.point_where(1.0)
    grid_tol = 1e-8
    worst = -np.inf
    for ws in family_22.waves:
        w_hat = float(ws.w.interp(x_hat))
        bound = (TOP - ws.i_value) / (TOP - 1.0)
        worst = max(worst, w_hat - bound)
    w_c = float(family_22.critical.w.interp(x_hat))
    ok = worst <= grid_tol and w_c <= 0.79 + grid_tol
    record_criterion(4, ok, f"x_hat={x_hat:.2e}, w_c(x_hat)={w_c:.6f} <= 0.79, "
                            f"max over members of w(x_hat)-(2-I)={worst:.3e}")
    assert ok


def test_criterion_05_decay_estimates(unit_kernel, logistic, family_22, family_3,
                                      record_criterion):
    waves = [kpp.solve_wave(unit_kernel, 2.5, 0.3), kpp.solve_wave(unit_kernel, 2.5, 0.5)]
    waves += list(family_22.waves) + list(family_3.waves)
    reports = [kpp.decay_diagnostics(ws) for ws in waves]
    violations = sum(r.left_violations + r.right_violations for r in reports)
    ok = violations == 0
    record_criterion(5, ok, f"{len(waves)} regression waves, {violations} violations")
    assert ok


def test_criterion_06_critical_bgp(canonical_bgp, canonical_params, record_criterion):
    b = canonical_bgp
    target = b.c**2 / 4
    gap = abs(target - b.i_value)
    s = b.policy.sigma.values
    z = b.z.values
    mass = b.diagnostics["mass"]
    shift = b.diagnostics["extension_shift"]
    checks = {
        "iterations<=200": b.iterations <= 200,
        "c in (2, 2.8284)": 2.0 < b.c < 2 * math.sqrt(2),
        "criticality": gap <= 1e-3 * target,
        "sigma=1 on left": s[0] == 1.0 and b.policy.x0 is not None,
        "sigma(xR)<0.05": s[-1] < 0.05,
        "z increasing": bool(np.all(np.diff(z[z < 0.5 - 1e-12]) > 0)),
        "|z(xR)-0.5|<=1e-3": abs(z[-1] - 0.5) <= 1e-3,
        "mass": abs(mass - 1) <= 1e-8,
        "doubling shift<=2e-3": shift <= 2e-3,
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record_criterion(6, ok, f"c={b.c:.7f}, iterations={b.iterations}, gap={gap:.2e}, "
                            f"z(xR)={z[-1]:.6f}, mass-1={mass - 1:.1e}, doubling shift={shift:.2e}"
                            + (f", failed: {failed}" if failed else ""))
    assert ok


def test_criterion_07_supercritical_bgp(super_bgps, record_criterion):
    details, ok = [], True
    for ell0, b in sorted(super_bgps.items()):
        hit = abs(b.diagnostics["w_at_x0"] - ell0)
        sub = b.i_value < b.c**2 / 4
        ok &= hit <= 1e-4 and sub
        details.append(f"ell0={ell0}: |w(x0)-ell0|={hit:.1e}, I={b.i_value:.4f} < {b.c**2 / 4:.4f}")
    record_criterion(7, ok, "; ".join(details))
    assert ok


def test_criterion_08_feasibility_windows(record_criterion):
    # admissible windows: 2k^2 < c < alpha(1) + k^2, c < rho;
    # critical below 2 k sqrt(alpha(1)), supercritical from there on
    S, F, D, Cr, Su = (C.SlowGrowthInfeasible, C.FastGrowthInfeasible, C.DiscountInfeasible,
                       C.CriticalWindow, C.SupercriticalWindow)
    expected = {
        3.0: [S, S, Cr, Su, Su, F, F],
        2.5: [S, S, D, D, D, F, F],
    }
    cs = [1.5, 2.0, 2.5, 2.83, 2.9, 3.0, 3.5]
    mismatches = []
    for rho, row in expected.items():
        params = mfg.ModelParams(1.0, rho, Power(2.0, 0.5))
        for c, want in zip(cs, row):
            got = mfg.feasibility(params, c)
            if got is not want:
                mismatches.append((rho, c, str(got), str(want)))
    ok = not mismatches
    record_criterion(8, ok, f"14 (c, rho) cells, mismatches: {mismatches}")
    assert ok


def test_criterion_09_oracle_equivalence(unit_kernel, logistic, record_criterion):
    triples = [(unit_kernel, 2.5, 0.3), (logistic, 2.2, None), (logistic, 2.2, 0.6),
               (logistic, 2.6, 0.3), (logistic, 3.0, 0.1), (logistic, 3.0, 0.5)]
    dists = []
    for k, c, th in triples:
        ws = kpp.critical_wave(k, c) if th is None else kpp.solve_wave(k, c, th)
        o = verify.oracle_bvp(k, c, ws.theta)
        dists.append(verify.oracle_distance(ws, o))
    ok = max(dists) <= 1e-4
    record_criterion(9, ok, "sup-norm distances " + ", ".join(f"{d:.1e}" for d in dists)
                            + " (<=1e-4)")
    assert ok


def test_criterion_10_reconstruction(canonical_bgp, canonical_params, record_criterion):
    rep = {r.name: r for r in verify.check_bgp(canonical_bgp, canonical_params)}
    names = ("K_formula", "nu_increasing", "nu_left_limit", "bellman")
    ok = all(rep[n].passed for n in names)
    record_criterion(10, ok, f"K={canonical_bgp.K:.6f}, |K-formula|={rep['K_formula'].measured:.1e}, "
                             f"nu increasing: {rep['nu_increasing'].passed}, "
                             f"|nu(-inf)-K|={rep['nu_left_limit'].measured:.1e} (<=1e-4), "
                             f"scaled Bellman defect={rep['bellman'].measured:.1e} (<=1e-3)")
    assert ok
