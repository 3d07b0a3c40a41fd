import math

import numpy as np
import pytest
from scipy.integrate import solve_bvp

from bgpwaves import mfg
from bgpwaves.alpha import Power
from bgpwaves.config import NumericsConfig
from bgpwaves.errors import ConfigError, FeasibilityError, NonConvergence
from bgpwaves.mfg import Classification as C


@pytest.mark.parametrize("rho,c,want", [
    (3.0, 1.5, C.SlowGrowthInfeasible),
    (3.0, 2.0, C.SlowGrowthInfeasible),
    (3.0, 2.5, C.CriticalWindow),
    (3.0, 2.83, C.SupercriticalWindow),
    (3.0, 2.9, C.SupercriticalWindow),
    (3.0, 3.0, C.FastGrowthInfeasible),
    (2.5, 2.5, C.DiscountInfeasible),
    (2.5, 2.2, C.CriticalWindow),
])
def test_feasibility(rho, c, want):
    assert mfg.feasibility(mfg.ModelParams(1.0, rho, Power(2.0, 0.5)), c) is want


def test_truncation_scheme_validation():
    with pytest.raises(ConfigError):
        mfg.TruncationScheme(2.0)
    with pytest.raises(ConfigError):
        mfg.TruncationScheme(20.0, "hard")


def test_initial_policy(canonical_params):
    g = mfg.model_grid(20.0, NumericsConfig(n_core=801))
    pol = mfg.initial_policy(g, canonical_params)
    s = pol.sigma.values
    assert np.all(s[g.nodes <= 0] == 1.0)
    assert np.all(np.diff(s) <= 0) and s[-1] < 1e-10
    # right of 0 the price e^x (rho - kappa^2) exceeds alpha'(1) = 1
    assert pol.x0 == 0.0 and s[g.index_of(0.0) + 1] < 1.0


def test_solve_z_matches_collocation(quick_bgp, canonical_params):
    b = quick_bgp
    p = canonical_params
    k2 = p.kappa**2
    a, w, s = b.policy.kernel.profile, b.wave.w, b.policy.sigma

    def rhs(x, y):
        z, dz = y
        react = (p.rho - k2) + a.interp(x) * w.interp(x)
        return np.vstack([dz, ((b.c - 2 * k2) * dz + react * z - (1 - s.interp(x))) / k2])

    def bc(ya, yb):
        return np.array([ya[0], yb[0] - p.z_limit])

    x = np.linspace(b.grid.xL, b.grid.xR, 2001)
    guess = np.vstack([b.z.interp(x), b.z.interp(x, 1)])
    sol = solve_bvp(rhs, bc, x, guess, tol=1e-8, max_nodes=200000)
    assert sol.success
    assert np.max(np.abs(sol.sol(b.grid.nodes)[0] - b.z.values)) < 1e-4


def test_quick_critical_path(quick_bgp, canonical_params):
    b = quick_bgp
    assert 2.0 < b.c < 2 * math.sqrt(2)
    assert b.history[-1]["delta"] < NumericsConfig().fp_tol
    assert b.diagnostics["criticality_gap"] < 1e-3 * b.c**2 / 4
    # the speed solves the normalization for the returned policy
    g = mfg.speed_normalization(b.policy, b.c, canonical_params)
    assert g == pytest.approx(0.5, abs=1e-6)
    assert b.tail_inequality == pytest.approx(2 / b.c)


def test_policy_is_argmax_of_value(quick_bgp, canonical_params):
    b = quick_bgp
    new = mfg.policy_from_value(b.z, b.wave, canonical_params, b.trunc)
    assert np.max(np.abs(new.sigma.values - b.policy.sigma.values)) < 1e-5


def test_value_integral_cutoffs(quick_bgp):
    b = quick_bgp
    m_exp = mfg.value_integral(b.z, b.wave, mfg.TruncationScheme(b.trunc.n, "exp"))
    m_add = mfg.value_integral(b.z, b.wave, mfg.TruncationScheme(b.trunc.n, "additive"))
    assert np.all(np.diff(m_exp) <= 0) and np.all(m_exp > 0)
    assert np.allclose(m_add - m_exp, m_add[-1] - m_exp[-1])


def test_windows_are_enforced(canonical_params):
    with pytest.raises(FeasibilityError):
        mfg.bgp_supercritical(canonical_params, 2.5)
    low_rho = mfg.ModelParams(1.0, 2.5, Power(2.0, 0.5))
    with pytest.raises(FeasibilityError):
        mfg.bgp_critical(low_rho, cfg=NumericsConfig(n=20.0, n_core=801, extend=False))


def test_reconstruct_refuses_discount_infeasible(quick_bgp, canonical_params):
    b = quick_bgp
    with pytest.raises(FeasibilityError):
        mfg.reconstruct(3.0, b.wave, b.z, b.policy, canonical_params)


def test_iteration_cap_reports_history(canonical_params):
    cfg = NumericsConfig(n=20.0, n_core=801, extend=False, max_iter=2)
    with pytest.raises(NonConvergence) as info:
        mfg.bgp_critical(canonical_params, cfg=cfg)
    assert len(info.value.history) == 2
