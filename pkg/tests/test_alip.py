import math

import numpy as np
import pytest

from hlbiped.alip import (
    AlipParams, AlipState, EmptyLog, StepRecord, alip_derivative, alip_flow, alip_planner_step,
    alip_self_log, orbital_energy, prediction_error_study, prediction_table_csv,
)

P = AlipParams(m=32.0, H=0.8, g=9.81, T=0.4)


def rk4(s: AlipState, t: float, params: AlipParams, dt: float = 1e-6) -> AlipState:
    n = max(1, int(round(t / dt)))
    h = t / n
    p, L = s.p, s.L
    mH, mg = params.m * params.H, params.m * params.g
    for _ in range(n):
        k1 = (L / mH, mg * p)
        k2 = ((L + 0.5 * h * k1[1]) / mH, mg * (p + 0.5 * h * k1[0]))
        k3 = ((L + 0.5 * h * k2[1]) / mH, mg * (p + 0.5 * h * k2[0]))
        k4 = ((L + h * k3[1]) / mH, mg * (p + h * k3[0]))
        p += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        L += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return AlipState(p, L)


def test_params_and_state_validation():
    with pytest.raises(ValueError):
        AlipParams(m=0.0)
    with pytest.raises(ValueError):
        AlipState(2.5, 0.0)
    with pytest.raises(ValueError):
        AlipState(0.0, math.nan)


def test_derivative_examples():
    assert alip_derivative(AlipState(0.0, 0.0), P) == (0.0, 0.0)
    dp, dL = alip_derivative(AlipState(0.1, 0.0), P)
    assert dp == 0.0 and dL == pytest.approx(31.392, abs=1e-12)
    s = AlipState(0.13, -4.2)
    a, b = alip_derivative(s, P), alip_derivative(-s, P)
    assert a == (-b[0], -b[1])


def test_flow_identity_and_semigroup():
    rng = np.random.default_rng(0)
    for _ in range(100):
        s = AlipState(rng.uniform(-0.3, 0.3), rng.uniform(-20, 20))
        assert alip_flow(s, 0.0, P) == s
        t1, t2 = rng.uniform(0, 0.3, 2)
        a = alip_flow(alip_flow(s, t1, P), t2, P)
        b = alip_flow(s, t1 + t2, P)
        assert a.p == pytest.approx(b.p, abs=1e-12)
        assert a.L == pytest.approx(b.L, abs=1e-12 * max(1, abs(b.L)))
    with pytest.raises(ValueError):
        alip_flow(AlipState(0, 0), -0.1, P)


def test_flow_matches_rk4_at_step_time():
    s = AlipState(-0.08, 7.5)
    a, b = alip_flow(s, 0.4, P), rk4(s, 0.4, P, 1e-6)
    assert abs(a.p - b.p) <= 1e-8 * abs(b.p)
    assert abs(a.L - b.L) <= 1e-8 * abs(b.L)


def test_flow_linearity():
    s = AlipState(0.05, -3.0)
    for a in (-2.0, 0.5, 3.0):
        x, y = alip_flow(s.scaled(a), 0.37, P), alip_flow(s, 0.37, P).scaled(a)
        assert x.p == pytest.approx(y.p, rel=1e-14) and x.L == pytest.approx(y.L, rel=1e-14)


def test_orbital_energy_conserved():
    rng = np.random.default_rng(1)
    for _ in range(200):
        s = AlipState(rng.uniform(-0.3, 0.3), rng.uniform(-20, 20))
        E0 = orbital_energy(s, P)
        for t in (0.1, 0.4, 0.6):
            E1 = orbital_energy(alip_flow(s, t, P), P)
            assert abs(E1 - E0) <= 1e-10 * max(1.0, abs(E0), s.L**2 / (P.m * P.H) ** 2)


def test_planner_rest_is_zero():
    assert alip_planner_step(AlipState(0.0, 0.0), 0.0, P) == 0.0


def test_planner_dead_beat_rollout():
    """Place the foot, flow one full step: the momentum lands on m H v_des."""
    s = AlipState(-0.05, 4.0)
    v = 0.5
    place = alip_planner_step(s, v, P, bound=np.inf)
    end = alip_flow(s, P.T, P)
    nxt = alip_flow(AlipState(-place, end.L), P.T, P)
    assert nxt.L == pytest.approx(P.m * P.H * v, rel=1e-12)


def test_planner_linear_in_v_des():
    s = AlipState(0.0, 0.0)
    a, b = alip_planner_step(s, 0.2, P), alip_planner_step(s, 0.4, P)
    assert b == pytest.approx(2 * a, rel=1e-14)


def test_planner_respects_remaining_time_and_bounds():
    s = AlipState(-0.1, 5.0)
    a = alip_planner_step(s, 0.3, P, t_step=0.1)
    b = alip_planner_step(alip_flow(s, 0.1, P), 0.3, P, t_step=0.2)
    assert a == pytest.approx(b, rel=1e-12)
    assert abs(alip_planner_step(AlipState(0.0, 60.0), 3.0, P)) == 0.6


def test_planner_fixed_point_converges_geometrically():
    log = alip_self_log(AlipState(-0.12, 0.0), P, 0.4, 12)
    errs = [abs(rec.L_touchdown / (P.m * P.H) - 0.4) for rec in log]
    assert errs[-1] < 1e-10
    assert all(b <= a + 1e-12 for a, b in zip(errs[1:], errs[2:]))


def test_self_prediction_has_zero_error():
    rows = prediction_error_study(alip_self_log(AlipState(-0.1, 0.0), P, 0.3, 20), P)
    assert rows.shape == (20, 3)
    np.testing.assert_allclose(rows[:, 1], rows[:, 2], atol=1e-12)


def test_prediction_study_empty_log():
    with pytest.raises(EmptyLog):
        prediction_error_study([], P)


def test_prediction_uses_realised_duration_when_asked():
    s = AlipState(-0.1, 6.0)
    rec = StepRecord(s, 0.35, alip_flow(s, 0.35, P).L)
    rows = prediction_error_study([rec], P, use_duration=True)
    assert rows[0, 1] == pytest.approx(rows[0, 2], rel=1e-14)


def test_prediction_table_format():
    rows = prediction_error_study(alip_self_log(AlipState(-0.1, 0.0), P, 0.3, 3), P)
    lines = prediction_table_csv(rows).splitlines()
    assert lines[0] == "step_index,predicted,actual"
    assert len(lines) == 4 and lines[1].startswith("0,")
