"""Task-space outputs y = y_a(q) - y_d(tau) and their Jacobians."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..rigid_body import foot_pitch, foot_point, stance_constraints
from ..rigid_body.model import FullState, RobotModel


@dataclass(frozen=True, eq=False)
class OutputJacobians:
    y_a: np.ndarray
    Jy: np.ndarray
    Jy_dot_qd: np.ndarray


def actual_outputs(model: RobotModel, state: FullState) -> OutputJacobians:
    """Torso pitch, base height over the stance sole, base-relative swing sole (x, z + H0)
    and, for flat feet, swing foot pitch."""
    q, qd = state.q, state.qd
    n = model.n_dof
    st, sw = state.stance_leg, state.swing_leg
    ps, _, Js, jds = foot_point(model, q, st, qd=qd)
    pw, _, Jw, jdw = foot_point(model, q, sw, qd=qd)
    e = np.eye(n)
    rows = [e[2], e[1] - Js[1], Jw[0] - e[0], Jw[1] - e[1]]
    vals = [q[2], q[1] - ps[1], pw[0] - q[0], pw[1] - q[1] + model.nominal_height]
    drift = [0.0, -jds[1], jdw[0], jdw[1]]
    if model.fully_actuated:
        phi, _, row = foot_pitch(model, q, sw, qd)
        rows.append(row)
        vals.append(phi)
        drift.append(0.0)
    return OutputJacobians(np.array(vals), np.array(rows), np.array(drift))


def output_eval(model: RobotModel, state: FullState, y_d, yd_dot=None):
    """Output error, its rate and the output Jacobians.

    Returns ``(y, ydot, OutputJacobians)`` with ``y = y_a - y_d`` and
    ``ydot = Jy qd - yd_dot``.
    """
    oj = actual_outputs(model, state)
    y_d = np.asarray(y_d, dtype=float)
    yd_dot = np.zeros_like(y_d) if yd_dot is None else np.asarray(yd_dot, dtype=float)
    return oj.y_a - y_d, oj.Jy @ state.qd - yd_dot, oj


def swing_output_point(model: RobotModel, state: FullState) -> np.ndarray:
    """Swing (x, z) in output coordinates; used to seed a new swing at touchdown."""
    return actual_outputs(model, state).y_a[2:4].copy()


def stance_terms(model: RobotModel, state: FullState):
    return stance_constraints(model, state.q, state.qd, state.stance_leg)
