import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bgpwaves import kpp
from bgpwaves.config import NumericsConfig
from bgpwaves.errors import ConfigError, NoWave, NoWaveAtHeight, RangeError
from bgpwaves.profiles import Profile, make_grid

# minimal height of the logistic kernel 2/(1+e^x) at c = 2.2; computed by the
# shooter and confirmed by the collocation oracle (I = 1.21 to 2e-7 there)
THETA_C_22 = 0.3656065890844737


def test_kernel_validation():
    g = make_grid(-30, 30, 101)
    with pytest.raises(ConfigError):
        kpp.Kernel.from_samples(g, np.tanh(g.nodes))
    k = kpp.Kernel.logistic()
    assert k.abar == 2.0 and k.aunderbar == 0.0
    assert k.point_where(1.0) == pytest.approx(0.0, abs=1e-9)


def test_left_end_must_be_flat():
    k = kpp.Kernel.logistic()
    with pytest.raises(ConfigError):
        kpp.solve_wave(k, 3.0, 0.5, NumericsConfig(x_left=-5.0))


def test_classical_kpp_wave(unit_kernel):
    ws = kpp.solve_wave(unit_kernel, 2.5, 0.3)
    assert ws.theta == pytest.approx(0.3, abs=1e-9)
    assert ws.i_value == pytest.approx(1.0, rel=1e-6)
    assert ws.lam == pytest.approx(0.5, abs=1e-3)
    assert ws.residual < 1e-5
    assert np.all(np.diff(ws.w.values) < 0)


def test_shoot_outcomes(unit_kernel, logistic, critical_22):
    assert kpp.shoot(unit_kernel, 2.5, 1e-8).kind == "Decayed"
    assert kpp.shoot(unit_kernel, 1.5, 1e-8).kind in ("TurnedUp", "CrossedZero")
    assert kpp.shoot(logistic, 2.2, 2 * critical_22.eps).kind == "CrossedZero"
    assert kpp.shoot(logistic, 2.2, 0.5 * critical_22.eps).kind == "Decayed"


def test_nonexistence(unit_kernel, logistic):
    with pytest.raises(NoWave):
        kpp.solve_wave(unit_kernel, 1.9, 0.3)
    with pytest.raises(NoWaveAtHeight) as info:
        kpp.solve_wave(logistic, 2.2, THETA_C_22 / 2)
    assert info.value.theta_c == pytest.approx(THETA_C_22, abs=1e-9)
    with pytest.raises(RangeError):
        kpp.critical_wave(logistic, 3.0)


def test_critical_wave(critical_22):
    ws = critical_22
    assert ws.critical
    assert ws.theta == pytest.approx(THETA_C_22, abs=1e-9)
    assert ws.i_value == pytest.approx(1.21, rel=1e-3)
    assert ws.tail_degree == 1
    assert ws.lam == pytest.approx(1.1, abs=1e-2)


def test_two_forms_of_the_criticality_integral(critical_22):
    a = kpp.criticality_integral(critical_22)
    b = kpp.criticality_integral_by_parts(critical_22)
    assert a == pytest.approx(b, rel=1e-6)
    assert a == pytest.approx(critical_22.i_value, rel=1e-6)


def test_minimal_height_limits(logistic):
    cs = [0.5, 1.0, 1.5, 2.0, 2.4, 2.6, 2.8]
    th = [kpp.critical_wave(logistic, c).theta for c in cs]
    assert np.all(np.diff(th) < 0)
    assert th[0] > 0.98 and th[-1] < 0.01


def test_full_foliation_above_the_threshold(logistic):
    fr = kpp.wave_family(logistic, 3.0, [0.1, 0.5, 0.9])
    assert fr.theta_c is None and all(e is None for e in fr.errors)
    i = fr.i_values
    assert 0 < i[2] < i[1] < i[0] < 2


def test_constant_family(unit_kernel):
    k = kpp.Kernel.constant(1.5)
    fr = kpp.wave_family(k, 3.0, [0.2, 0.5, 0.8])
    w = [ws.w.values for ws in fr.waves]
    assert np.all(w[0] < w[1]) and np.all(w[1] < w[2])
    assert np.allclose(fr.i_values, 1.5, rtol=1e-6)


def test_family_fills_the_criticality_range(logistic):
    thetas = [THETA_C_22, 0.5, 0.7, 0.9, 0.95]
    fr = kpp.wave_family(logistic, 2.2, thetas)
    i = np.array(fr.i_values)
    assert i[0] == pytest.approx(1.21, rel=1e-3)
    assert np.all(np.diff(i) < 0) and i[-1] > 0


@given(st.floats(THETA_C_22 + 1e-3, 0.9), st.floats(1e-3, 0.05))
@settings(max_examples=10, deadline=None)
def test_ordering_property(theta, gap):
    k = kpp.Kernel.logistic()
    a = kpp.solve_wave(k, 2.2, theta)
    b = kpp.solve_wave(k, 2.2, theta + gap)
    # slow members may sit on a longer grid; compare on the shared range
    xa = a.grid.nodes[a.grid.nodes <= b.grid.xR]
    xb = b.grid.nodes[b.grid.nodes <= a.grid.xR]
    x = xa if xa.size <= xb.size else xb
    assert np.all(a.w.interp(x) < b.w.interp(x))
    assert a.i_value > b.i_value


def test_speed_ordering_on_the_flat_region():
    def f(x):
        return np.where(x <= 0, 2.0, 2.0 * np.exp(-np.maximum(x, 0) ** 2))

    def df(x):
        return np.where(x <= 0, 0.0, -4.0 * np.maximum(x, 0) * np.exp(-np.maximum(x, 0) ** 2))

    k = kpp.Kernel.from_function(f, df, abar=2.0, aunderbar=0.0)
    th = [kpp.critical_wave(k, c).theta for c in (1.6, 2.0, 2.4)]
    assert th[0] > th[1] > th[2]


def test_decay_diagnostics_rates(unit_kernel):
    ws = kpp.solve_wave(unit_kernel, 2.5, 0.5)
    rep = kpp.decay_diagnostics(ws)
    assert rep.gamma0 == pytest.approx(1 / 7, rel=1e-9)
    assert rep.gamma0_tilde == pytest.approx(0.2, rel=1e-9)
    assert rep.ok


def test_critical_decay_constant(critical_22):
    rep = kpp.decay_diagnostics(critical_22)
    assert rep.ok and rep.decay_K is not None and rep.decay_K > 0
    assert rep.right_degree == 1


def test_residual_detects_perturbation(unit_kernel):
    ws = kpp.solve_wave(unit_kernel, 2.5, 0.3)
    assert kpp.residual(ws) < 1e-5
    w = ws.w
    bumped = Profile(w.grid, w.values + 0.01, w.left, w.right, slopes=w.slopes)
    assert kpp.residual(dataclasses.replace(ws, w=bumped)) > 1e-3


def test_bit_identical_repeats(logistic):
    a = kpp.solve_wave(logistic, 2.6, 0.4)
    b = kpp.solve_wave(logistic, 2.6, 0.4)
    assert np.array_equal(a.w.values, b.w.values) and a.i_value == b.i_value


def test_left_point_wave(logistic):
    k = kpp.Kernel.constant(1.0)
    ws = kpp.solve_wave_from_left_point(k, 2.5, 0.0, 0.4)
    assert ws.start == "point"
    assert float(ws.w.interp(0.0)) == pytest.approx(0.4, abs=1e-9)
    assert ws.w.values[0] < 1


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("BGPWAVES_THREADS", "3")
    assert kpp.thread_count() == 3
    monkeypatch.setenv("BGPWAVES_THREADS", "x")
    with pytest.raises(ConfigError):
        kpp.thread_count()


def test_critical_crossings_records_sign_changes(logistic):
    crit = [kpp.critical_wave(logistic, c) for c in (2.1, 2.5)]
    rows = kpp.critical_crossings(crit)
    assert [r["crossings"] for r in rows] == [0]
    # two waves pinned to the same height at 0 but with different speeds must cross there
    a = kpp.solve_wave(logistic, 2.2, 0.5)
    b = kpp.solve_wave(logistic, 3.0, 0.5)
    (row,) = kpp.critical_crossings([a, b])
    assert row["crossings"] >= 1 and abs(row["first_x"]) < 0.1
