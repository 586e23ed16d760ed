"""Episodic walking environment: reduced-order observation, task-space action, shaped reward."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..gait import GaitGenerator, HLAction, Z_OFFSET, normalize_action
from ..rigid_body import (
    angular_momentum, centroidal_momentum, com_state, foot_pitch, leg_reach, load_model, make_state,
    mass_matrix, stance_constraints, standing_pose, step,
)
from ..rigid_body.dynamics import ImpactInfeasible, SingularConstraint, TOUCHDOWN_THRESHOLD
from ..rigid_body.model import FullState, RobotModel, TerrainSpec
from ..tracking import Controller, GainSet, OutputBundle, QPWeights, swing_output_point
from ..tracking.controllers import DecouplingSingular
from ..tracking.qp import QPInfeasible
from . import _fused

OBS_DIM = 5
ACT_DIM = 3
REWARD_WEIGHTS_2D = np.array([0.6, 0.0, 0.2, 0.2])
LEGS = ("left", "right")


class InvalidConfig(ValueError):
    pass


def terrain_height(x, alpha: float):
    if abs(alpha) > 0.35:
        raise InvalidConfig(f"slope {alpha:.3f} rad outside |alpha| <= 0.35")
    return np.tan(alpha) * x


@dataclass
class EnvConfig:
    """Everything that stays fixed across episodes of one environment."""

    robot: str = "rabbit"
    controller: str = "fl"
    gains: str = "nominal"
    qp_task_weight: float = 1e4
    qp_torque_weight: float = 1e-4
    dt: float = 1e-3
    ll_ticks: int = 30
    step_time: float = 0.4
    z_clearance: float = 0.12
    min_swing_fraction: float = 0.5
    max_hl_steps: int = 300
    reward_weights: tuple = (0.6, 0.0, 0.2, 0.2)
    init_q_std: float = 0.03
    init_qd_std: float = 0.05
    v_range: tuple = (-1.0, 1.0)
    v_resample: float = 3.0
    alpha_range_deg: tuple = (0.0, 10.0)
    train_disturbances: bool = False
    force_range: tuple = (-40.0, 40.0)
    engine: str = "auto"  # auto | fused | python

    def validate(self):
        if self.controller not in ("fl", "idqp"):
            raise InvalidConfig(f"unknown controller {self.controller!r}")
        if self.gains not in ("nominal", "high_gain"):
            raise InvalidConfig(f"unknown gain profile {self.gains!r}")
        if self.engine not in ("auto", "fused", "python"):
            raise InvalidConfig(f"unknown engine {self.engine!r}")
        if self.engine == "fused" and self.controller != "fl":
            raise InvalidConfig("the fused engine only implements the FL controller")
        if self.ll_ticks <= 0 or self.dt <= 0 or self.max_hl_steps <= 0:
            raise InvalidConfig("tick counts and dt must be positive")
        w = np.asarray(self.reward_weights, dtype=float)
        if w.shape != (4,) or np.any(w < 0):
            raise InvalidConfig("reward weights must be 4 non-negative numbers")
        lo, hi = self.alpha_range_deg
        if max(abs(lo), abs(hi)) > math.degrees(0.35):
            raise InvalidConfig("slope range exceeds 0.35 rad")
        return self


@dataclass
class EpisodeConfig:
    """One episode: piecewise-constant speed command, slope, torso pushes.

    ``v_profile`` is a list of ``(t_start, v)`` pairs; ``disturbances`` a
    list of ``(t_start, duration, F_x)``.
    """

    v_profile: list = field(default_factory=lambda: [(0.0, 0.0)])
    alpha: float = 0.0
    disturbances: list = field(default_factory=list)
    max_hl_steps: int = 300
    seed: int | None = None
    noise: bool = True

    def validate(self):
        if not self.v_profile or self.v_profile[0][0] > 0.0:
            raise InvalidConfig("speed profile must start at t = 0")
        ts = [t for t, _ in self.v_profile]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise InvalidConfig("speed profile times must be non-decreasing")
        if abs(self.alpha) > 0.35:
            raise InvalidConfig(f"slope {self.alpha:.3f} rad outside |alpha| <= 0.35")
        for t0, dur, fx in self.disturbances:
            if dur < 0 or abs(fx) > 80.0:
                raise InvalidConfig("disturbances need duration >= 0 and |F_x| <= 80 N")
        if self.max_hl_steps <= 0:
            raise InvalidConfig("max_hl_steps must be positive")
        return self

    def v_des(self, t: float) -> float:
        v = self.v_profile[0][1]
        for t0, vk in self.v_profile:
            if t + 1e-12 >= t0:
                v = vk
        return float(v)

    def force(self, t: float) -> float:
        f = 0.0
        for t0, dur, fx in self.disturbances:
            if t0 <= t < t0 + dur:
                f += fx
        return f


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict


class VelocityTracker:
    """Per-step mean base velocity with a trailing-window fallback before the first touchdown."""

    def __init__(self, dt: float = 1e-3, window: float = 0.4):
        self.n_window = max(1, int(round(window / dt)))
        self.current: list[float] = []
        self.trailing: list[float] = []
        self.last_step_mean: float | None = None

    def add(self, vx: float, touchdown: bool = False):
        self.current.append(vx)
        if self.last_step_mean is None:
            self.trailing.append(vx)
            if len(self.trailing) > self.n_window:
                del self.trailing[0]
        if touchdown:
            self.last_step_mean = float(np.mean(self.current))
            self.current = []

    @property
    def value(self) -> float:
        if self.last_step_mean is not None:
            return self.last_step_mean
        return float(np.mean(self.trailing)) if self.trailing else 0.0


def average_velocity(vx, touchdowns=None, dt: float = 1e-3, window: float = 0.4) -> float:
    """Mean base velocity over the last completed step (or the trailing window)."""
    tr = VelocityTracker(dt, window)
    td = np.zeros(len(vx), dtype=bool) if touchdowns is None else np.asarray(touchdowns, bool)
    for v, t in zip(vx, td):
        tr.add(float(v), bool(t))
    return tr.value


def reward_terms(v_bar: float, v_des: float, L_com: float, a_prev, a_now,
                 vy_err: float = 0.0) -> np.ndarray:
    """(r_vx, r_vy, r_LCoM, r_a); actions in normalized units."""
    da = np.asarray(a_now, dtype=float) - np.asarray(a_prev, dtype=float)
    return np.array([
        math.exp(-(v_bar - v_des) ** 2),
        math.exp(-vy_err**2),
        math.exp(-L_com**2),
        math.exp(-float(da @ da)),
    ])


def reward(terms, weights=REWARD_WEIGHTS_2D) -> float:
    return float(np.asarray(weights, dtype=float) @ np.asarray(terms, dtype=float))


LOG_COLUMNS = ["t", "v_x_d", "v_bar_x", "r_vx", "r_vy", "r_LCoM", "r_a", "p_sw_T_x", "q_phi",
               "h_d", "torso_pitch", "h", "L_y", "L_CoM", "reward", "terminated"]


class BipedEnv:
    """Planar biped MDP: 30 LL ticks per HL action, FL or ID-QP tracking."""

    def __init__(self, config: EnvConfig | None = None, model: RobotModel | None = None):
        self.config = (config or EnvConfig()).validate()
        c = self.config
        self.model = model or load_model(c.robot)
        m = self.model
        self.weights = np.asarray(c.reward_weights, dtype=float)
        self.gains = GainSet.named(c.gains)
        nout = 5 if m.fully_actuated else 4
        self.controller = Controller(c.controller, self.gains,
                                     QPWeights(task=c.qp_task_weight, torque=c.qp_torque_weight))
        self.fused = c.engine == "fused" or (c.engine == "auto" and c.controller == "fl")
        self.reach = leg_reach(m)
        self.gait = GaitGenerator(H0=m.nominal_height, T=c.step_time, z_clearance=c.z_clearance,
                                  flat_foot=m.fully_actuated, reach=self.reach)
        self._nout = nout
        self._rows = np.stack([m.contact_rows(l) for l in LEGS])
        self._feet = np.array([[m.feet[l].link, *m.feet[l].sole] for l in LEGS], dtype=float)
        self._ground = np.array([[[m.feet[l].link, *p] for p in m.ground_points(l)] for l in LEGS],
                                dtype=float)
        self.rng = np.random.default_rng(0)
        self.state: FullState | None = None
        self.episode: EpisodeConfig | None = None
        self.log_rows: list = []

    # ------------------------------------------------------------------ setup
    def sample_episode(self, rng: np.random.Generator) -> EpisodeConfig:
        """Training curriculum: resampled speed commands, random slope, optional pushes."""
        c = self.config
        horizon = c.max_hl_steps * c.ll_ticks * c.dt
        prof = []
        t = 0.0
        while t < horizon:
            prof.append((t, float(rng.uniform(*c.v_range))))
            t += c.v_resample
        alpha = math.radians(float(rng.uniform(*c.alpha_range_deg)))
        dist = []
        if c.train_disturbances:
            dist.append((float(rng.uniform(1.0, horizon - 1.0)), 0.15, float(rng.uniform(*c.force_range))))
        return EpisodeConfig(prof, alpha, dist, c.max_hl_steps)

    def reset(self, episode: EpisodeConfig | None = None, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        elif episode is not None and episode.seed is not None:
            self.rng = np.random.default_rng(episode.seed)
        ep = (episode or self.sample_episode(self.rng)).validate()
        self.episode = ep
        m, c = self.model, self.config
        q = standing_pose(m, alpha=ep.alpha)
        qd = np.zeros(m.n_dof)
        if ep.noise:
            q[2:] += c.init_q_std * self.rng.standard_normal(m.n_dof - 2)
            qd[2:] += c.init_qd_std * self.rng.standard_normal(m.n_dof - 2)
        q, qd = self._settle(q, qd, ep.alpha)
        self.state = make_state(m, q, qd, "left")
        self.terrain = TerrainSpec(ep.alpha)
        self.gait.reset(swing_output_point(m, self.state))
        self.velocity = VelocityTracker(c.dt)
        self.hl_steps = 0
        self.t = 0.0
        self.prev_action = np.zeros(ACT_DIM)
        self.done = False
        self.log_rows = []
        self.touchdowns = []
        return self.observation()

    def _settle(self, q, qd, alpha):
        """Shift the base so the stance sole sits on the terrain at its nominal x, and
        project velocities onto the stance constraint."""
        m = self.model
        nominal = standing_pose(m, alpha=alpha)
        target, _, _ = stance_constraints(m, nominal, np.zeros(m.n_dof), "left")
        pos, _, _ = stance_constraints(m, q, qd, "left")
        # the first two rows are the x and z of one stance point
        q = q.copy()
        q[0] += target[0] - pos[0]
        q[1] += target[1] - pos[1]
        if m.fully_actuated:
            # rotate the stance ankle so the foot lies flat on the slope
            phi, _, _ = foot_pitch(m, q, "left")
            ankle = m.leg_coords("left")[2]
            q[ankle] += -alpha - phi
            pos, _, _ = stance_constraints(m, q, qd, "left")
            q[0] += target[0] - pos[0]
            q[1] += target[1] - pos[1]
        _, J, _ = stance_constraints(m, q, qd, "left")
        M = mass_matrix(m, q)
        MinvJT = np.linalg.solve(M, J.T)
        qd = qd - MinvJT @ np.linalg.solve(J @ MinvJT, J @ qd)
        return q, qd

    # ------------------------------------------------------------- quantities
    @property
    def v_des(self) -> float:
        return self.episode.v_des(self.t)

    def observation(self) -> np.ndarray:
        s = self.state
        L = angular_momentum(self.model, s, s.contact_point)
        vbar = self.velocity.value
        return np.array([s.q[0] - s.contact_point[0], L, vbar - self.v_des, self.v_des,
                         self.episode.alpha])

    def base_height(self) -> float:
        return float(self.state.q[1] - self.terrain.height(self.state.q[0]))

    # ------------------------------------------------------------------- step
    def hl_step(self, action) -> StepResult:
        if self.done:
            raise RuntimeError("episode has terminated; call reset()")
        if not isinstance(action, HLAction):
            action = HLAction.from_array(action)
        a_norm = normalize_action(action.as_array())
        self.gait.set_target(action)
        v_des = self.v_des
        cause = self._run_ll()
        self.hl_steps += 1
        self.t = self.hl_steps * self.config.ll_ticks * self.config.dt
        m, s = self.model, self.state
        L_com = centroidal_momentum(m, s) if cause != "numerical" else float("nan")
        vbar = self.velocity.value
        terms = reward_terms(vbar, v_des, 0.0 if not math.isfinite(L_com) else L_com,
                             self.prev_action, a_norm)
        r = reward(terms, self.weights)
        h = self.base_height()
        if cause is None:
            if abs(s.q[2]) >= 1.0:
                cause = "pitch"
            elif h <= 0.5:
                cause = "height"
            elif s.t_step > 3.0 * self.config.step_time:
                cause = "stall"
        terminated = cause is not None
        truncated = not terminated and self.hl_steps >= self.episode.max_hl_steps
        self.done = terminated or truncated
        delta = float(np.linalg.norm(a_norm - self.prev_action))
        self.prev_action = a_norm
        obs = self.observation() if cause != "numerical" else np.zeros(OBS_DIM)
        L_y = float(obs[1])
        info = {"v_bar": vbar, "v_des": v_des, "L_com": L_com, "terms": terms,
                "action_delta": delta,
                "fall_cause": cause, "t": self.t, "h": h, "L_y": L_y}
        self.log_rows.append([self.t, v_des, vbar, *terms, *action.as_array(), s.q[2], h, L_y,
                              L_com, r, int(terminated)])
        return StepResult(obs, r, terminated, truncated, info)

    def _forces(self, n):
        t0 = self.t
        dt = self.config.dt
        return np.array([self.episode.force(t0 + k * dt) for k in range(n)])

    def _run_ll(self) -> str | None:
        c, m, g = self.config, self.model, self.gait
        n = c.ll_ticks
        forces = self._forces(n)
        min_swing = c.min_swing_fraction * c.step_time
        if self.fused:
            s = self.state
            gk = np.atleast_1d(np.asarray(self.gains.Kp, dtype=float)) * np.ones(self._nout)
            gd = np.atleast_1d(np.asarray(self.gains.Kd, dtype=float)) * np.ones(self._nout)
            st = LEGS.index(s.stance_leg)
            status, vx, td, tdi, st, t_step = _fused.run_ticks(
                s.q, s.qd, st, s.t_step, s.contact_ref, s.contact_point, g.p0, g.command,
                g.target, g.slew_rates, n, c.dt, min_swing, c.step_time, c.z_clearance,
                self.reach, 0.3, Z_OFFSET, m.nominal_height, self.episode.alpha, gk, gd, forces,
                self._nout, m.n_act, m.torque_limits, self._rows, self._feet, self._ground,
                TOUCHDOWN_THRESHOLD, m.parent, m.coord, m.offset, m.com, m.mass, m.inertia,
                m.gravity)
            s.stance_leg = LEGS[st]
            s.t_step = t_step
            if status != _fused.OK:
                return "numerical"
            for k in range(n):
                self.velocity.add(float(vx[k]), bool(td[k]))
                if td[k]:
                    self.touchdowns.append(tuple(float(v) for v in tdi[k]))
            return None
        for k in range(n):
            g.advance(c.dt)
            yd, ydd, yddd, _ = g.desired(self.state.t_step, self.episode.alpha)
            fx = forces[k]
            info = {}
            try:
                u = self.controller(m, self.state, OutputBundle(yd, ydd, yddd))
                s2 = step(m, self.state, u, c.dt, self.terrain,
                          disturbance=(np.array([fx, 0.0]) if fx != 0.0 else None),
                          min_swing_time=min_swing, info=info)
            except (DecouplingSingular, SingularConstraint, ImpactInfeasible, QPInfeasible,
                    np.linalg.LinAlgError):
                return "numerical"
            if not (np.all(np.isfinite(s2.q)) and np.all(np.isfinite(s2.qd))):
                return "numerical"
            touched = s2.stance_leg != self.state.stance_leg
            if touched:
                g.touchdown(swing_output_point(m, s2))
                pre = info["pre_impact"]
                self.touchdowns.append((
                    pre.t_step, angular_momentum(m, pre, pre.contact_point),
                    com_state(m, s2)[0][0] - s2.contact_point[0],
                    angular_momentum(m, s2, s2.contact_point)))
            self.state = s2
            self.velocity.add(float(s2.qd[0]), touched)
        return None

    # -------------------------------------------------------------------- log
    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for row in self.log_rows:
            w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in row])
        return buf.getvalue()


def run_episode(env: BipedEnv, policy, episode: EpisodeConfig | None = None,
                seed: int | None = None):
    """Roll out ``policy(obs, env) -> HLAction`` until the episode ends; returns the step results."""
    obs = env.reset(episode, seed)
    out = []
    while True:
        res = env.hl_step(policy(obs, env))
        out.append(res)
        obs = res.observation
        if res.terminated or res.truncated:
            return out
