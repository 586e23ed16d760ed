"""Low-level task-space trackers: feedback linearization and inverse-dynamics QP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rigid_body import bias_forces, clamp_torques, mass_matrix
from ..rigid_body.dynamics import SingularConstraint
from ..rigid_body.model import FullState, RobotModel
from .outputs import output_eval, stance_terms
from .qp import QPInfeasible, qp_solve


class DecouplingSingular(RuntimeError):
    """The output-to-torque map lost rank (relative degree is no longer 2)."""


@dataclass(frozen=True)
class GainSet:
    Kp: float | np.ndarray = 400.0
    Kd: float | np.ndarray = 40.0
    profile: str = "nominal"

    def __post_init__(self):
        if np.any(np.asarray(self.Kp) <= 0) or np.any(np.asarray(self.Kd) <= 0):
            raise ValueError("PD gains must be positive")

    @classmethod
    def nominal(cls):
        return cls(400.0, 40.0, "nominal")

    @classmethod
    def high_gain(cls):
        return cls(2500.0, 100.0, "high_gain")

    @classmethod
    def named(cls, name: str):
        return {"nominal": cls.nominal, "high_gain": cls.high_gain}[name]()


@dataclass(frozen=True)
class QPWeights:
    task: np.ndarray | float = 1e4
    torque: float = 1e-4
    unilateral: bool = True

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.task, dtype=float))
        if np.any(t < 0) or self.torque < 0 or not np.any(t > 0):
            raise ValueError("QP weights must be non-negative with at least one task weight > 0")


@dataclass(frozen=True, eq=False)
class OutputBundle:
    """Desired outputs with derivatives, as produced by the gait generator."""

    y_d: np.ndarray
    yd_dot: np.ndarray
    yd_ddot: np.ndarray


def commanded_accel(y, ydot, yd_ddot, gains: GainSet) -> np.ndarray:
    """Desired output accelerations: yd_ddot - Kp y - Kd ydot."""
    return np.asarray(yd_ddot) - np.asarray(gains.Kp) * y - np.asarray(gains.Kd) * ydot


def constrained_affine(model: RobotModel, state: FullState, M=None, H=None):
    """qdd = a0 + A_u u under the stance constraint, with lambda eliminated."""
    M = mass_matrix(model, state.q) if M is None else M
    H = bias_forces(model, state.q, state.qd) if H is None else H
    _, J, jd = stance_terms(model, state)
    MinvJT = np.linalg.solve(M, J.T)
    S = J @ MinvJT
    if np.linalg.eigvalsh(S)[0] <= 1e-10 * max(1.0, np.abs(S).max()):
        raise SingularConstraint("contact KKT matrix is rank deficient")
    Minv_B = np.linalg.solve(M, model.B)
    Minv_H = np.linalg.solve(M, H)
    K = MinvJT @ np.linalg.solve(S, J)
    A_u = Minv_B - K @ Minv_B
    a0 = -(Minv_H - K @ Minv_H) - MinvJT @ np.linalg.solve(S, jd)
    return a0, A_u


def fl_controller(model: RobotModel, state: FullState, bundle: OutputBundle,
                  gains: GainSet = GainSet(), clamp: bool = True) -> np.ndarray:
    """Feedback-linearizing torques imposing ydd = -Kp y - Kd ydot on the output error.

    With more actuators than outputs the minimum-norm torque is used.
    """
    y, ydot, oj = output_eval(model, state, bundle.y_d, bundle.yd_dot)
    v = commanded_accel(y, ydot, bundle.yd_ddot, gains)
    a0, A_u = constrained_affine(model, state)
    A = oj.Jy @ A_u
    b = v - oj.Jy @ a0 - oj.Jy_dot_qd
    if np.linalg.cond(A) > 1e8:
        raise DecouplingSingular(f"decoupling matrix condition {np.linalg.cond(A):.3g}")
    if A.shape[0] == A.shape[1]:
        u = np.linalg.solve(A, b)
    else:
        u = A.T @ np.linalg.solve(A @ A.T, b)
    return clamp_torques(model, u) if clamp else u


def idqp_problem(model: RobotModel, state: FullState, bundle: OutputBundle,
                 gains: GainSet, weights: QPWeights):
    """Assemble (H, f, A_eq, b_eq, bounds) over z = [qdd, u, lambda]."""
    n, m = model.n_dof, model.n_act
    y, ydot, oj = output_eval(model, state, bundle.y_d, bundle.yd_dot)
    ydd_cmd = commanded_accel(y, ydot, bundle.yd_ddot, gains)
    M = mass_matrix(model, state.q)
    Hb = bias_forces(model, state.q, state.qd)
    _, J, jd = stance_terms(model, state)
    c = J.shape[0]
    nz = n + m + c
    W = np.diag(np.broadcast_to(np.asarray(weights.task, dtype=float), (len(y),)))
    Hq = np.zeros((nz, nz))
    Hq[:n, :n] = 2.0 * oj.Jy.T @ W @ oj.Jy
    Hq[n:n + m, n:n + m] = 2.0 * weights.torque * np.eye(m)
    f = np.zeros(nz)
    f[:n] = 2.0 * oj.Jy.T @ W @ (oj.Jy_dot_qd - ydd_cmd)
    A_eq = np.zeros((n + c, nz))
    A_eq[:n, :n] = M
    A_eq[:n, n:n + m] = -model.B
    A_eq[:n, n + m:] = -J.T
    A_eq[n:, :n] = J
    b_eq = np.concatenate([-Hb, -jd])
    lb = np.full(nz, -np.inf)
    ub = np.full(nz, np.inf)
    lb[n:n + m] = -model.torque_limits
    ub[n:n + m] = model.torque_limits
    if weights.unilateral:
        rows = model.contact_rows(state.stance_leg)
        lb[n + m:][rows[:, 3] == 1] = 0.0
    return Hq, f, A_eq, b_eq, (lb, ub)


def idqp_controller(model: RobotModel, state: FullState, bundle: OutputBundle,
                    gains: GainSet = GainSet(), weights: QPWeights = QPWeights(),
                    return_solution: bool = False):
    """Inverse-dynamics QP over (qdd, u, lambda); returns the torque part."""
    prob = idqp_problem(model, state, bundle, gains, weights)
    res = qp_solve(*prob)
    if not res.ok:
        raise QPInfeasible("ID-QP active-set iteration did not converge")
    n, m = model.n_dof, model.n_act
    u = np.clip(res.x[n:n + m], -model.torque_limits, model.torque_limits)
    return (u, res) if return_solution else u


@dataclass
class Controller:
    """Callable wrapper selecting FL or ID-QP behind one interface."""

    kind: str = "fl"
    gains: GainSet = field(default_factory=GainSet)
    weights: QPWeights = field(default_factory=QPWeights)

    def __post_init__(self):
        if self.kind not in ("fl", "idqp"):
            raise ValueError(f"unknown controller {self.kind!r}")

    def __call__(self, model, state, bundle):
        if self.kind == "fl":
            return fl_controller(model, state, bundle, self.gains)
        return idqp_controller(model, state, bundle, self.gains, self.weights)
