import numpy as np
import pytest

from bgpwaves import kpp, verify
from bgpwaves.errors import NonConvergence


def _by_name(reports):
    return {r.name: r for r in reports}


def test_oracle_matches_classical_wave(unit_kernel):
    ws = kpp.solve_wave(unit_kernel, 2.5, 0.3)
    o = verify.oracle_bvp(unit_kernel, 2.5, 0.3)
    assert verify.oracle_distance(ws, o) < 1e-4
    assert o.i_value == pytest.approx(1.0, rel=1e-6)


def test_oracle_at_minimal_height(logistic, critical_22):
    o = verify.oracle_bvp(logistic, 2.2, critical_22.theta)
    assert abs(o.i_value - 1.21) < 1e-3
    assert verify.oracle_distance(critical_22, o) < 1e-4


def test_oracle_below_minimal_height_fails(logistic, critical_22):
    with pytest.raises(NonConvergence) as info:
        verify.oracle_bvp(logistic, 2.2, critical_22.theta / 2)
    assert info.value.history


@pytest.mark.parametrize("c,theta", [(2.2, None), (2.2, 0.6), (2.6, 0.3), (3.0, 0.1), (3.0, 0.9)])
def test_solver_waves_pass_every_check(logistic, c, theta):
    ws = kpp.critical_wave(logistic, c) if theta is None else kpp.solve_wave(logistic, c, theta)
    reports = verify.check_wave(ws)
    failed = [r.name for r in reports if not r.passed]
    assert failed == []
    for r in reports:
        assert np.isfinite(r.measured) and np.isfinite(r.bound)


def test_flat_segment_is_located(unit_kernel):
    ws = kpp.solve_wave(unit_kernel, 2.5, 0.3)
    rec = verify.SolutionRecord.from_wave(ws)
    k = int(np.searchsorted(rec.x, 2.0))
    rec.w[k + 1] = rec.w[k]
    rec.dw[k] = rec.dw[k + 1] = 0.0
    r = _by_name(verify.check_wave_record(rec))["decreasing"]
    assert not r.passed and abs(r.location - rec.x[k]) < 0.1


def test_wrong_tail_breaks_the_rate_identity(unit_kernel):
    ws = kpp.solve_wave(unit_kernel, 2.5, 0.3)
    rec = verify.SolutionRecord.from_wave(ws)
    x = rec.x
    tail = x > 5
    factor = np.exp(-0.3 * (x[tail] - 5))
    rec.dw[tail] = rec.dw[tail] * factor - 0.3 * rec.w[tail] * factor
    rec.w[tail] = rec.w[tail] * factor
    assert not _by_name(verify.check_wave_record(rec))["decay_rate_identity"].passed


def test_reports_are_reproducible_from_files(tmp_path, critical_22):
    rec = verify.SolutionRecord.from_wave(critical_22)
    rec.write(tmp_path)
    back = verify.SolutionRecord.read(tmp_path / "solution.csv")
    a = [r.as_dict() for r in verify.check_wave(critical_22)]
    b = [r.as_dict() for r in verify.check_wave_record(back)]
    assert a == b


def test_bgp_checks_pass(quick_bgp, canonical_params):
    reports = verify.check_bgp(quick_bgp, canonical_params, fp_tol=1e-6)
    assert [r.name for r in reports if not r.passed] == []
    names = {r.name for r in reports}
    assert {"z_floor", "z_limit", "mass", "criticality", "bellman", "integrable_tail"} <= names


def test_bgp_reports_reproducible(tmp_path, quick_bgp, canonical_params):
    rec = verify.SolutionRecord.from_bgp(quick_bgp, {"alpha": {"family": "power", "a0": 2.0,
                                                               "eta": 0.5}})
    rec.write(tmp_path)
    back = verify.SolutionRecord.read(tmp_path / "solution.csv")
    params = verify.params_from_meta(back.meta)
    a = [r.as_dict() for r in verify.check_bgp(quick_bgp, canonical_params, fp_tol=1e-6)]
    b = [r.as_dict() for r in verify.check_bgp_record(back, params, fp_tol=1e-6)]
    assert a == b


def test_hand_edited_z_is_caught(quick_bgp, canonical_params):
    rec = verify.SolutionRecord.from_bgp(quick_bgp)
    rec.z[-1] = 0.45
    rep = _by_name(verify.check_bgp_record(rec, canonical_params))
    assert not rep["z_limit"].passed or not rep["z_floor"].passed


def test_supercritical_reports(super_bgps, canonical_params):
    rep = _by_name(verify.check_bgp(super_bgps[0.5], canonical_params))
    assert rep["criticality"].applicable is False
    assert rep["subcritical_functional"].passed
    assert rep["speed_window"].passed
    assert all(r.passed for r in rep.values())
