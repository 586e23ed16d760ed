"""Evaluation runs, baselines, robustness sweeps and the momentum-prediction study.

Every function returns plain data (dicts / row lists) so the CLI, the demos
and the tests share one implementation.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .alip import AlipParams, AlipState, StepRecord, alip_self_log, prediction_error_study
from .env import AlipBaseline, BipedEnv, EnvConfig, EpisodeConfig, run_episode
from .ppo import CheckpointError

DEFAULT_PROFILE = [(0.0, 0.0), (3.0, 0.5), (6.0, 1.0), (9.0, -0.5)]
SETTLE = 1.5


def parse_profile(text: str) -> list[tuple[float, float]]:
    """``"0:0,3:0.5,6:1"`` -> [(0, 0), (3, 0.5), (6, 1)]."""
    out = []
    for part in text.split(","):
        t, v = part.split(":")
        out.append((float(t), float(v)))
    return out


def profile_duration(profile, tail: float = 3.0) -> float:
    return profile[-1][0] + tail


def hl_steps_for(duration: float, config: EnvConfig) -> int:
    return int(math.ceil(duration / (config.ll_ticks * config.dt)))


@dataclass
class EvalResult:
    log: list
    fell: bool
    fall_cause: str | None
    segments: list = field(default_factory=list)  # (t0, t1, v_des, mean |err|, mean v_bar)
    touchdowns: list = field(default_factory=list)

    @property
    def rmse(self) -> float:
        e = [r[2] - r[1] for r in self.log]
        return float(np.sqrt(np.mean(np.square(e)))) if e else float("nan")

    @property
    def max_segment_error(self) -> float:
        errs = [s[3] for s in self.segments if math.isfinite(s[3])]
        return max(errs) if errs else float("nan")


def segment_errors(log, profile, end_time: float, settle: float = SETTLE):
    """Per-segment steady-state tracking: mean |v_bar - v_des| after ``settle`` seconds."""
    out = []
    bounds = [t for t, _ in profile] + [end_time]
    for (t0, v), t1 in zip(profile, bounds[1:]):
        rows = [r for r in log if t0 + settle <= r[0] <= t1]
        if rows:
            vb = np.array([r[2] for r in rows])
            out.append((t0, t1, v, float(np.mean(np.abs(vb - v))), float(np.mean(vb))))
        else:
            out.append((t0, t1, v, float("nan"), float("nan")))
    return out


def evaluate(policy, config: EnvConfig, profile, alpha: float = 0.0, disturbances=(),
             seed: int = 0, noise: bool = True, duration: float | None = None,
             settle: float = SETTLE) -> EvalResult:
    """One episode of ``policy(obs, env) -> HLAction`` on a speed profile."""
    duration = profile_duration(profile) if duration is None else duration
    env = BipedEnv(config)
    ep = EpisodeConfig(list(profile), alpha, list(disturbances), hl_steps_for(duration, config),
                       seed, noise)
    res = run_episode(env, policy, ep)
    cause = res[-1].info["fall_cause"] if res[-1].terminated else None
    return EvalResult(env.log_rows, cause is not None, cause,
                      segment_errors(env.log_rows, profile, duration, settle), env.touchdowns)


def bundled_policy_path(robot: str = "rabbit") -> str:
    """Path of the policy shipped with the package for ``robot``."""
    path = os.path.join(os.path.dirname(__file__), "policies", f"{robot}.bin")
    if not os.path.exists(path):
        raise CheckpointError(f"no bundled policy for robot {robot!r}")
    return path


def policy_fn(checkpoint_policy):
    return checkpoint_policy.as_env_policy(None)


def alip_baseline(config: EnvConfig, profile, seed: int = 0, noise: bool = False,
                  duration: float | None = None, feed: str = "com") -> EvalResult:
    env_model = BipedEnv(config).model
    return evaluate(AlipBaseline(env_model, feed=feed), config, profile, seed=seed, noise=noise,
                    duration=duration)


# ---------------------------------------------------------------- prediction study
FIG2_SETUPS = {
    "ideal": dict(robot="rabbit_ideal", controller="fl", gains="high_gain"),
    "nonideal": dict(robot="rabbit", controller="idqp", gains="nominal"),
}


def step_log_from_touchdowns(touchdowns) -> list[StepRecord]:
    """Pair each post-impact state with the next pre-impact momentum."""
    log = []
    for a, b in zip(touchdowns[:-1], touchdowns[1:]):
        log.append(StepRecord(AlipState(a[2], a[3]), b[0], b[1]))
    return log


def fig2_study(variant: str, v_des: float = 0.3, n_steps: int = 20, warmup: int = 6,
               seed: int = 0):
    """Prediction-vs-actual rows (step, predicted, actual) over ``n_steps`` steady steps.

    The ALIP baseline walks the robot; each prediction flows the state right
    after touchdown over the expected step time.
    """
    if variant == "self":
        params = AlipParams()
        return prediction_error_study(alip_self_log(AlipState(-0.1, 0.0), params, v_des, n_steps),
                                      params)
    if variant not in FIG2_SETUPS:
        raise ValueError(f"unknown variant {variant!r}")
    config = EnvConfig(**FIG2_SETUPS[variant])
    env = BipedEnv(config)
    planner = AlipBaseline(env.model)
    duration = (warmup + n_steps + 2) * planner.params.T + 0.5
    ep = EpisodeConfig([(0.0, v_des)], 0.0, [], hl_steps_for(duration, config), seed, False)
    res = run_episode(env, planner, ep)
    if res[-1].terminated:
        raise RuntimeError(f"walking failed during the prediction study ({res[-1].info['fall_cause']})")
    log = step_log_from_touchdowns(env.touchdowns)[warmup:warmup + n_steps]
    rows = prediction_error_study(log, planner.params)
    return rows


def mean_prediction_error(rows) -> float:
    return float(np.mean(np.abs(rows[:, 1] - rows[:, 2])))


# ---------------------------------------------------------------- robustness
def recovery_time(log, t_push_end: float, v_des: float, tol: float = 0.15,
                  hold: float = 0.5) -> float:
    """Time after the push until |v_bar - v_des| stays within ``tol`` for ``hold`` seconds."""
    rows = [r for r in log if r[0] >= t_push_end]
    if not rows:
        return float("inf")
    t_last = rows[-1][0]
    for i, r in enumerate(rows):
        if t_last < r[0] + hold - 1e-9:
            break
        window = [x for x in rows[i:] if x[0] <= r[0] + hold + 1e-9]
        if all(abs(x[2] - v_des) <= tol for x in window):
            return r[0] - t_push_end
    return float("inf")


def perturb_grid(policy, config: EnvConfig, forces=(-40.0, -20.0, 20.0, 40.0),
                 durations=(0.15,), v_des: float = 0.5, trials: int = 10, seed: int = 0,
                 t_push: float = 4.0, horizon: float = 8.0, recover_within: float = 2.0):
    """Rows (F_x, duration, survived, recovered, trials, mean recovery time)."""
    rows = []
    for f in forces:
        for dur in durations:
            surv = rec = 0
            times = []
            for k in range(trials):
                dist = [(t_push, dur, f)] if f != 0.0 else []
                r = evaluate(policy, config, [(0.0, v_des)], 0.0, dist, seed=seed + k,
                             duration=horizon)
                if r.fell:
                    continue
                surv += 1
                tr = recovery_time(r.log, t_push + dur, v_des)
                times.append(tr)
                rec += tr <= recover_within
            mt = float(np.mean([t for t in times if math.isfinite(t)])) if any(
                math.isfinite(t) for t in times) else float("nan")
            rows.append((f, dur, surv, rec, trials, mt))
    return rows


def slope_grid(policy, config: EnvConfig, speeds=(-0.5, 0.0, 0.5, 1.0),
               alphas_deg=(-5.0, 0.0, 5.0, 10.0), seed: int = 0, duration: float = 8.0):
    """Rows (v_des, alpha_deg, mean |error| after settling, rmse, fell)."""
    rows = []
    for v in speeds:
        for a in alphas_deg:
            r = evaluate(policy, config, [(0.0, v)], math.radians(a), seed=seed,
                         duration=duration)
            rows.append((v, a, r.segments[0][3], r.rmse, int(r.fell)))
    return rows


# ---------------------------------------------------------------- output tables
def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def table_csv(columns, rows, meta: dict) -> str:
    """CSV with a leading metadata comment (config hash, code version) and a header row."""
    buf = io.StringIO()
    buf.write(f"# hlbiped {__version__} config {config_hash(meta)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def env_meta(config: EnvConfig, **extra) -> dict:
    d = asdict(config)
    d.update(extra)
    return d
