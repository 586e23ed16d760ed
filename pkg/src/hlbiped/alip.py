"""Angular-momentum linear inverted pendulum (ALIP): flow, planner and prediction study.

State ``(p, L)``: horizontal CoM (or base) position relative to the stance
contact and the pitch angular momentum about that contact::

    dp/dt = L / (m H)
    dL/dt = m g p
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np


class EmptyLog(ValueError):
    """A prediction study was requested on a log without touchdowns."""


@dataclass(frozen=True)
class AlipParams:
    m: float = 32.0
    H: float = 0.8
    g: float = 9.81
    T: float = 0.4

    def __post_init__(self):
        if self.m <= 0 or self.H <= 0 or self.T <= 0:
            raise ValueError("ALIP parameters must be positive")

    @property
    def ell(self) -> float:
        return math.sqrt(self.g / self.H)


@dataclass(frozen=True)
class AlipState:
    p: float
    L: float

    def __post_init__(self):
        if not (math.isfinite(self.p) and math.isfinite(self.L)):
            raise ValueError("non-finite ALIP state")
        if abs(self.p) >= 2.0:
            raise ValueError(f"|p| = {abs(self.p):.3f} m outside the 2 m sanity bound")

    def __neg__(self):
        return AlipState(-self.p, -self.L)

    def scaled(self, a: float) -> "AlipState":
        return AlipState(a * self.p, a * self.L)


def alip_derivative(s: AlipState, params: AlipParams) -> tuple[float, float]:
    return s.L / (params.m * params.H), params.m * params.g * s.p


def alip_flow(s0: AlipState, t: float, params: AlipParams) -> AlipState:
    """Closed-form solution of the ALIP dynamics after time ``t``."""
    if t < 0:
        raise ValueError("ALIP flow time must be non-negative")
    ell = params.ell
    mHl = params.m * params.H * ell
    c, s = math.cosh(ell * t), math.sinh(ell * t)
    return AlipState(s0.p * c + s0.L * s / mHl, mHl * s0.p * s + s0.L * c)


def orbital_energy(s: AlipState, params: AlipParams) -> float:
    """Conserved quantity L^2 / (2 m^2 H^2) - g p^2 / (2 H)."""
    mH = params.m * params.H
    return s.L**2 / (2 * mH**2) - params.g * s.p**2 / (2 * params.H)


def alip_planner_step(current: AlipState, v_des: float, params: AlipParams,
                      t_step: float = 0.0, bound: float = 0.6) -> float:
    """One-step dead-beat foot placement, returned as swing-foot x relative to the base.

    Predicts the momentum at the end of the current step, then places the
    foot so that the next step ends with ``L = m H v_des``. The pendulum
    position right after touchdown is ``-placement``.
    """
    ell = params.ell
    mH = params.m * params.H
    L_end = alip_flow(current, max(params.T - t_step, 0.0), params).L
    L_des = mH * v_des
    c, s = math.cosh(ell * params.T), math.sinh(ell * params.T)
    p_after = (L_des - c * L_end) / (mH * ell * s)
    return float(np.clip(-p_after, -bound, bound))


@dataclass(frozen=True)
class StepRecord:
    """Per-step data needed for the prediction study.

    ``start`` is the ALIP state right after touchdown (about the new
    contact), ``duration`` the realised step time, ``L_touchdown`` the
    full-order momentum about the same contact just before the next impact.
    """

    start: AlipState
    duration: float
    L_touchdown: float


def prediction_error_study(log: list[StepRecord], params: AlipParams,
                           use_duration: bool = False) -> np.ndarray:
    """Rows of (step_index, predicted, actual) with momenta scaled by 1/(m H).

    The prediction flows the step-start state over the nominal step time
    ``params.T`` unless ``use_duration`` is set.
    """
    if not log:
        raise EmptyLog("no completed steps in the log")
    mH = params.m * params.H
    rows = []
    for k, rec in enumerate(log):
        t = rec.duration if use_duration else params.T
        pred = alip_flow(rec.start, t, params).L
        rows.append((k, pred / mH, rec.L_touchdown / mH))
    return np.array(rows)


def prediction_table_csv(rows: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step_index", "predicted", "actual"])
    for k, pred, act in rows:
        w.writerow([int(k), f"{pred:.9g}", f"{act:.9g}"])
    return buf.getvalue()


def alip_self_log(s0: AlipState, params: AlipParams, v_des: float, n_steps: int) -> list[StepRecord]:
    """Log of the reduced model simulating itself under the dead-beat planner."""
    log = []
    s = s0
    for _ in range(n_steps):
        end = alip_flow(s, params.T, params)
        log.append(StepRecord(s, params.T, end.L))
        place = alip_planner_step(s, v_des, params, bound=np.inf)
        s = AlipState(-place, end.L)
    return log
