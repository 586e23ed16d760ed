import math

from hlbiped import experiments as ex

T_END = 4.2  # push end, on the 0.03 s grid


def synthetic_log(v_of_t, t_end=6.0, dt=0.03):
    n = int(round(t_end / dt))
    return [(k * dt, 0.5, v_of_t(k * dt)) for k in range(n + 1)]


def test_recovery_time_on_hl_grid():
    # off by 0.3 until t = 5.0, then on target from the row at 5.01
    log = synthetic_log(lambda t: 0.2 if t < 5.0 - 1e-9 else 0.5)
    assert abs(ex.recovery_time(log, T_END, 0.5) - 0.81) < 1e-9


def test_recovery_time_immediate_and_never():
    assert ex.recovery_time(synthetic_log(lambda t: 0.45), T_END, 0.5) == 0.0
    assert math.isinf(ex.recovery_time(synthetic_log(lambda t: 0.2), T_END, 0.5))


def test_recovery_time_needs_full_hold():
    # back in band only in the last 0.3 s of the log
    log = synthetic_log(lambda t: 0.2 if t < 5.7 else 0.5)
    assert math.isinf(ex.recovery_time(log, T_END, 0.5))
    # a single excursion inside the hold window restarts the clock
    log = synthetic_log(lambda t: 0.2 if t < 4.5 or abs(t - 4.8) < 0.01 else 0.5)
    assert abs(ex.recovery_time(log, T_END, 0.5) - 0.63) < 1e-9
