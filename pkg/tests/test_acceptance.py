"""Acceptance criteria A1-A10; ``pytest tests/test_acceptance.py`` prints one PASS/FAIL line each."""

import math
import os
import sys
import time

import numpy as np
import pytest

from conftest import constrained_qd, random_q
from hlbiped import experiments as ex
from hlbiped.alip import AlipParams, AlipState, alip_flow, orbital_energy
from hlbiped.env import BipedEnv, EnvConfig, reward, reward_terms
from hlbiped.gait import Z_OFFSET, SwingSpec, bezier5_z, landing_height, min_jerk
from hlbiped.ppo import PPOConfig, Policy, from_bytes, load_checkpoint, to_bytes, train
from hlbiped.rigid_body import (
    angular_momentum, foot_point, gravity_vector, impact_reset, load_model, make_state,
    mass_matrix, mechanical_energy, standing_pose, step,
)
from hlbiped.tracking import actual_outputs, fl_controller, idqp_controller, OutputBundle

POLICY = os.path.join(os.path.dirname(ex.__file__), "policies", "rabbit.bin")
CURVE = os.path.join(os.path.dirname(ex.__file__), "policies", "rabbit_curve.csv")
PROFILES = (
    [(0.0, 0.0), (3.0, 0.5), (6.0, 1.0), (9.0, -0.5)],
    [(0.0, 0.0), (3.0, -0.5), (6.0, -1.0), (9.0, 0.5)],
)


def detail(record_property, text):
    record_property("detail", text)


@pytest.fixture(scope="module")
def policy():
    if not os.path.exists(POLICY):
        pytest.fail("bundled policy missing")
    return load_checkpoint(POLICY)


@pytest.fixture(scope="module")
def a5_runs(policy):
    fn = policy.as_env_policy(None)
    cfg = EnvConfig()
    return [ex.evaluate(fn, cfg, PROFILES[k % 2], seed=k) for k in range(10)]


# ---------------------------------------------------------------- A1
def rk4_batch(p, L, t, params, n=6000):
    h = t / n
    mH, mg = params.m * params.H, params.m * params.g
    f = lambda p, L: (L / mH, mg * p)
    for _ in range(n):
        k1 = f(p, L)
        k2 = f(p + 0.5 * h * k1[0], L + 0.5 * h * k1[1])
        k3 = f(p + 0.5 * h * k2[0], L + 0.5 * h * k2[1])
        k4 = f(p + h * k3[0], L + h * k3[1])
        p = p + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        L = L + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return p, L


def test_a1_alip_closed_form(record_property):
    t0 = time.perf_counter()
    P = AlipParams(m=32.0, H=0.8)
    rng = np.random.default_rng(0)
    p0, L0 = rng.uniform(-0.3, 0.3, 1000), rng.uniform(-20, 20, 1000)
    t = rng.uniform(0.0, 0.6, 1000)
    pr, Lr = rk4_batch(p0, L0, t, P)
    rel, energy = 0.0, 0.0
    for i in range(1000):
        s0 = AlipState(p0[i], L0[i])
        s = alip_flow(s0, t[i], P)
        # relative error of the state, components scaled to a common unit
        scale = np.hypot(pr[i], Lr[i] / (P.m * P.H) / math.sqrt(P.g / P.H))
        rel = max(rel, np.hypot(s.p - pr[i], (s.L - Lr[i]) / (P.m * P.H) / math.sqrt(P.g / P.H)) / scale)
        E0 = orbital_energy(s0, P)
        energy = max(energy, abs(orbital_energy(s, P) - E0) / max(1.0, abs(E0)))
    dt = time.perf_counter() - t0
    detail(record_property, f"max rel err {rel:.2e}, energy drift {energy:.2e}, {dt:.2f} s")
    assert rel < 1e-8 and energy < 1e-10 and dt < 5.0


# ---------------------------------------------------------------- A2
def test_a2_dynamics_correctness(record_property):
    t0 = time.perf_counter()
    rabbit = load_model("rabbit")
    rng = np.random.default_rng(1)
    worst = {}
    min_eig = np.inf
    for _ in range(2000):
        q = random_q(rabbit, rng)
        min_eig = min(min_eig, np.linalg.eigvalsh(mass_matrix(rabbit, q))[0])
    g_err, h = 0.0, 1e-5
    pe = lambda q: mechanical_energy(rabbit, q, np.zeros_like(q))[1]
    for _ in range(10):
        q = random_q(rabbit, rng)
        grad = np.array([(pe(q + h * e) - pe(q - h * e)) / (2 * h) for e in np.eye(rabbit.n_dof)])
        g_err = max(g_err, np.abs(gravity_vector(rabbit, q) - grad).max())
    s = make_state(rabbit, standing_pose(rabbit, pitch=0.1))
    E0 = sum(mechanical_energy(rabbit, s.q, s.qd))
    drift = 0.0
    for _ in range(10_000):
        s = step(rabbit, s, np.zeros(4), dt=1e-4, integrator="rk4", min_swing_time=np.inf)
        drift = max(drift, abs(sum(mechanical_energy(rabbit, s.q, s.qd)) - E0))
    imp = 0.0
    q = standing_pose(rabbit, half_stride=0.12)
    n_imp = 0
    while n_imp < 20:
        qd = constrained_qd(rabbit, q, rng)
        if foot_point(rabbit, q, "right", qd=qd)[1][1] > -0.05:
            continue
        pre = make_state(rabbit, q, qd)
        post = impact_reset(rabbit, pre)
        c = foot_point(rabbit, q, "right")[0]
        imp = max(imp, abs(angular_momentum(rabbit, pre, c) - angular_momentum(rabbit, post, c)))
        n_imp += 1
    agree, n_int = 0.0, 0
    for name in ("rabbit", "walker2d"):
        m = load_model(name)
        for _ in range(30):
            qq = standing_pose(m, half_stride=0.1)
            qq[2:] += 0.1 * rng.standard_normal(m.n_dof - 2)
            st = make_state(m, qq, constrained_qd(m, qq, rng, scale=0.3))
            y = actual_outputs(m, st).y_a
            b = OutputBundle(y + 0.01 * rng.standard_normal(len(y)), np.zeros(len(y)), np.zeros(len(y)))
            u_fl = fl_controller(m, st, b, clamp=False)
            if np.any(np.abs(u_fl) > m.torque_limits):
                continue
            u_qp, res = idqp_controller(m, st, b, return_solution=True)
            if res.active_lower.any() or res.active_upper.any():
                continue
            agree = max(agree, np.linalg.norm(u_fl - u_qp) / (1 + np.linalg.norm(u_fl)))
            n_int += 1
    dt = time.perf_counter() - t0
    detail(record_property, f"min eig M {min_eig:.2e}, |G - dV| {g_err:.1e}, drift {drift:.1e} J/s, "
                            f"impact dL {imp:.1e}, FL/QP {agree:.1e} ({n_int} pts), {dt:.0f} s")
    assert min_eig > 0 and g_err < 1e-8 and drift < 1e-4 and imp < 1e-9
    assert agree < 1e-6 and n_int >= 10 and dt < 60.0


# ---------------------------------------------------------------- A3
def test_a3_prediction_gap(record_property):
    ideal = ex.mean_prediction_error(ex.fig2_study("ideal"))
    nonideal = ex.mean_prediction_error(ex.fig2_study("nonideal"))
    detail(record_property, f"ideal {ideal:.4f} m/s, non-ideal {nonideal:.4f} m/s, "
                            f"ratio {nonideal / ideal:.2f}")
    assert ideal < 0.05 and nonideal >= 2.0 * ideal


# ---------------------------------------------------------------- A4
def test_a4_alip_baseline(record_property):
    r = ex.alip_baseline(EnvConfig(), [(0.0, 0.3)], duration=10.0)
    err = r.segments[0][3]
    detail(record_property, f"steady-state mean error {err:.3f} m/s, fell {r.fell}")
    assert not r.fell and err < 0.1


# ---------------------------------------------------------------- A5
def random_policy_returns(n=20):
    env = BipedEnv(EnvConfig())
    pol = Policy.create(5, 3)
    out = []
    rng = np.random.default_rng(0)
    for k in range(n):
        obs = env.reset(seed=k)
        total = 0.0
        fn = pol.as_env_policy(rng)
        while True:
            res = env.hl_step(fn(obs, env))
            total += res.reward
            obs = res.observation
            if res.terminated or res.truncated:
                break
        out.append(total)
    return np.array(out)


def test_a5_speed_tracking(record_property, a5_runs):
    falls = sum(r.fell for r in a5_runs)
    worst = max(r.max_segment_error for r in a5_runs)
    text = f"worst segment error {worst:.3f} m/s, falls {falls}/10"
    ok = falls == 0 and worst < 0.15
    if not ok and os.path.exists(CURVE):
        rows = np.genfromtxt(CURVE, delimiter=",", skip_header=1, names=True)
        rnd = random_policy_returns()
        at200 = rows["mean_reward"][min(199, len(rows) - 1)]
        fb = at200 > rnd.mean() + 3 * rnd.std()
        text += (f"; fallback: curve {at200:.1f} vs random {rnd.mean():.1f} +/- "
                 f"{rnd.std():.1f} -> {'met' if fb else 'not met'} (primary failed)")
    detail(record_property, text)
    assert ok


# ---------------------------------------------------------------- A6
def test_a6_controller_agnostic(record_property, policy):
    fn = policy.as_env_policy(None)
    setups = {"fl/nominal": EnvConfig(), "fl/high_gain": EnvConfig(gains="high_gain"),
              "idqp/nominal": EnvConfig(controller="idqp")}
    runs = {k: [ex.evaluate(fn, c, PROFILES[j], seed=j) for j in range(2)] for k, c in setups.items()}
    falls = sum(r.fell for rs in runs.values() for r in rs)
    diff = 0.0
    for j in range(2):
        errs = np.array([[s[3] for s in runs[k][j].segments] for k in setups if not runs[k][j].fell])
        if len(errs) > 1:
            diff = max(diff, float((errs.max(axis=0) - errs.min(axis=0)).max()))
    worst = {k: max(r.max_segment_error for r in rs) for k, rs in runs.items()}
    detail(record_property, f"max segment difference {diff:.3f} m/s, falls {falls}, worst "
           + ", ".join(f"{k} {v:.3f}" for k, v in worst.items()))
    assert falls == 0 and diff < 0.1


# ---------------------------------------------------------------- A7
def test_a7_push_recovery(record_property, policy):
    rows = ex.perturb_grid(policy.as_env_policy(None), EnvConfig(), (-40.0, -20.0, 20.0, 40.0),
                           (0.15,), v_des=0.5, trials=10, seed=100)
    detail(record_property, "; ".join(f"{r[0]:+.0f} N survived {r[2]}/10 recovered {r[3]}/10"
                                      for r in rows))
    assert all(r[2] >= 9 and r[3] >= 9 for r in rows)


# ---------------------------------------------------------------- A8
def test_a8_slope_grid(record_property, policy):
    rows = ex.slope_grid(policy.as_env_policy(None), EnvConfig(), (-0.5, 0.0, 0.5, 1.0),
                         (-5.0, 0.0, 5.0, 10.0), seed=0)
    corner = lambda r: r[0] < 0 and r[1] == 10.0
    bad = [r for r in rows if not corner(r) and (r[4] or r[2] >= 0.2)]
    worst = max(r[2] for r in rows if not corner(r))
    c = [r for r in rows if corner(r)][0]
    detail(record_property, f"worst error {worst:.3f} m/s off-corner, failing cells {len(bad)}, "
                            f"corner error {c[2]:.3f} fell {c[4]}")
    assert not bad


# ---------------------------------------------------------------- A9
def test_a9_unit_identities(record_property):
    t0 = time.perf_counter()
    w = np.array([0.6, 0.0, 0.2, 0.2])
    r0 = reward(reward_terms(0.0, 0.0, 0.0, np.zeros(3), np.zeros(3)), w)
    rng = np.random.default_rng(2)
    bc = 0.0
    for _ in range(200):
        a, b, T = rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.2, 1.0)
        p, v, acc = min_jerk(a, b, 1.0, T)
        p0, v0, acc0 = min_jerk(a, b, 0.0, T)
        bc = max(bc, abs(p - b), abs(v), abs(acc), abs(p0 - a), abs(v0), abs(acc0))
        spec = SwingSpec([0, a / 10], [0, b / 10], rng.uniform(0.05, 0.2), T)
        for tau, target in ((0.0, a / 10), (1.0, b / 10)):
            zp, zv, _ = bezier5_z(spec, tau)
            bc = max(bc, abs(zp - target), abs(zv))
    lh = 0.0
    for _ in range(1000):
        h, p, al = rng.uniform(-0.1, 0.1), rng.uniform(-0.6, 0.6), rng.uniform(-0.35, 0.35)
        lh = max(lh, abs(landing_height(h, p, al) - (-h + p * math.tan(al) - Z_OFFSET)))
    dt = time.perf_counter() - t0
    detail(record_property, f"reward at zero error {r0}, boundary err {bc:.1e}, "
                            f"landing err {lh:.1e}, {dt * 1e3:.0f} ms")
    assert r0 == w.sum() and bc < 1e-12 and lh <= 1e-15 and dt < 1.0


# ---------------------------------------------------------------- A10
def test_a10_determinism_and_persistence(record_property, policy):
    cfg = PPOConfig(workers=2, steps_per_iter=64, minibatch=32, epochs=1)
    factory = lambda: BipedEnv(EnvConfig(max_hl_steps=20))
    a = train(factory, cfg, 2, seed=3)
    b = train(factory, cfg, 2, seed=3)
    same_train = a[1] == b[1] and np.array_equal(a[0].pi.flat(), b[0].pi.flat())
    fn = policy.as_env_policy(None)
    e1 = ex.evaluate(fn, EnvConfig(), PROFILES[0], seed=7, duration=4.0)
    e2 = ex.evaluate(fn, EnvConfig(), PROFILES[0], seed=7, duration=4.0)
    same_eval = e1.log == e2.log
    back = from_bytes(to_bytes(policy))
    obs = np.random.default_rng(3).normal(0, 2, (100, 5))
    same_ckpt = all(np.array_equal(policy.act(o), back.act(o)) for o in obs)
    detail(record_property, f"train reproducible {same_train}, eval reproducible {same_eval}, "
                            f"checkpoint bit-exact {same_ckpt}")
    assert same_train and same_eval and same_ckpt


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
