"""Planar floating-base dynamics with a pinned stance foot and plastic impacts."""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .model import ContactSolution, FullState, RobotModel, TerrainSpec

TOUCHDOWN_THRESHOLD = 1e-4


class SingularConstraint(RuntimeError):
    """The contact KKT matrix is rank deficient (kinematic singularity)."""


class ImpactInfeasible(RuntimeError):
    """Plastic impact would need the ground to pull on the foot."""


def _args(model):
    return model.parent, model.coord, model.offset


def _dyn_args(model):
    return (model.parent, model.coord, model.offset, model.com, model.mass,
            model.inertia, model.gravity)


def mass_matrix(model: RobotModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    M, _ = K.mass_bias(q, np.zeros_like(q), *_dyn_args(model))
    return M


def bias_forces(model: RobotModel, q, qd, gravity: bool = True) -> np.ndarray:
    """H(q, qd) = C(q, qd) qd + G(q). No joint friction or damping."""
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    g = model.gravity if gravity else 0.0
    a = _dyn_args(model)
    _, H = K.mass_bias(q, qd, *a[:-1], g)
    return H


def gravity_vector(model: RobotModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return bias_forces(model, q, np.zeros_like(q))


def mechanical_energy(model: RobotModel, q, qd) -> tuple[float, float]:
    """(kinetic, potential) energy in J."""
    return K.energy(np.asarray(q, float), np.asarray(qd, float), *_dyn_args(model))


def point_state(model: RobotModel, q, qd, link: int, local) -> tuple[np.ndarray, ...]:
    """World position, velocity, Jacobian and Jdot*qd of a body point."""
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    o, vo, phi, om = K.frames(q, qd, *_args(model))
    return K.point_kin(link, float(local[0]), float(local[1]), q.shape[0],
                       model.parent, model.coord, o, vo, phi, om)


def foot_point(model: RobotModel, q, leg: str, name: str = "sole", qd=None):
    f = model.feet[leg]
    qd = np.zeros(len(q)) if qd is None else qd
    return point_state(model, q, qd, f.link, getattr(f, name))


def link_angles(model: RobotModel, q, qd=None) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(q, dtype=float)
    qd = np.zeros_like(q) if qd is None else np.asarray(qd, dtype=float)
    _, _, phi, om = K.frames(q, qd, *_args(model))
    return phi, om


def foot_pitch(model: RobotModel, q, leg: str, qd=None):
    """Absolute foot angle, its rate and Jacobian row (positive = toe down)."""
    link = model.feet[leg].link
    phi, om = link_angles(model, q, qd)
    return phi[link], om[link], K.angle_row(link, len(q), model.parent, model.coord)


def stance_constraints(model: RobotModel, q, qd, leg: str):
    """(positions, Jacobian, Jdot*qd) of the stance-foot constraint rows."""
    rows = model.contact_rows(leg)
    return K.constraint_rows(np.asarray(q, float), np.asarray(qd, float), rows, *_args(model))


def clamp_torques(model: RobotModel, u) -> np.ndarray:
    lim = model.torque_limits
    return np.clip(np.asarray(u, dtype=float), -lim, lim)


def disturbance_force(model: RobotModel, q, force) -> np.ndarray:
    """Generalized force of a world force applied at the torso CoM."""
    force = np.atleast_1d(np.asarray(force, dtype=float))
    if force.size == 1:
        force = np.array([force[0], 0.0])
    torso = 0
    _, _, J, _ = point_state(model, q, np.zeros(len(q)), torso, model.links[torso].com)
    return J.T @ force


def contact_dynamics(model: RobotModel, state: FullState, u, disturbance=None) -> ContactSolution:
    """Solve [M, -J^T; J, 0] [qdd; lambda] = [B u - H; -Jdot qd] for the stance contact."""
    u = clamp_torques(model, u)
    tau = model.B @ u
    if disturbance is not None:
        tau = tau + disturbance_force(model, state.q, disturbance)
    qdd, lam, ok = K.contact_accel(
        state.q, state.qd, tau, model.contact_rows(state.stance_leg), *_dyn_args(model))
    if not ok:
        raise SingularConstraint("contact KKT matrix is rank deficient")
    return ContactSolution(qdd=qdd, lam=lam)


def angular_momentum(model: RobotModel, state_or_q, about_point, qd=None) -> float:
    """L^y about a world point, in kg m^2/s."""
    if isinstance(state_or_q, FullState):
        q, qd = state_or_q.q, state_or_q.qd
    else:
        q = state_or_q
    a = np.asarray(about_point, dtype=float)
    return K.momentum(np.asarray(q, float), np.asarray(qd, float), a[0], a[1],
                      model.parent, model.coord, model.offset, model.com, model.mass,
                      model.inertia)


def com_state(model: RobotModel, state_or_q, qd=None) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(state_or_q, FullState):
        q, qd = state_or_q.q, state_or_q.qd
    else:
        q = state_or_q
        qd = np.zeros(len(q)) if qd is None else qd
    return K.com_kin(np.asarray(q, float), np.asarray(qd, float), model.parent, model.coord,
                     model.offset, model.com, model.mass)


def centroidal_momentum(model: RobotModel, state: FullState) -> float:
    """Angular momentum about the CoM (L_CoM)."""
    pc, _ = com_state(model, state)
    return angular_momentum(model, state, pc)


def _impact_velocity(model, q, qd_minus, leg):
    M = mass_matrix(model, q)
    _, J, _ = stance_constraints(model, q, qd_minus, leg)
    qd_plus, impulse, ok = K.kkt_solve(M, J, M @ qd_minus, np.zeros(J.shape[0]))
    if not ok:
        raise SingularConstraint("impact KKT matrix is rank deficient")
    return qd_plus, impulse


def impact_reset(model: RobotModel, pre: FullState) -> FullState:
    """Rigid plastic impact of the swing foot; swaps stance and swing labels.

    Positions are unchanged; post-impact velocities solve
    ``[M, -J^T; J, 0] [qd+; Lambda] = [M qd-; 0]`` with ``J`` the Jacobian of
    the new stance contact.
    """
    new_stance = pre.swing_leg
    qd_plus, impulse = _impact_velocity(model, pre.q, pre.qd, new_stance)
    rows = model.contact_rows(new_stance)
    vertical = impulse[rows[:, 3] == 1].sum()
    if vertical < 0.0:
        raise ImpactInfeasible(f"vertical impulse {vertical:.3g} N s < 0")
    ref, _, _ = stance_constraints(model, pre.q, qd_plus, new_stance)
    p, _, _, _ = foot_point(model, pre.q, new_stance)
    return FullState(pre.q.copy(), qd_plus, new_stance, 0.0, p.copy(), ref)


def impact_impulse(model: RobotModel, pre: FullState) -> np.ndarray:
    return _impact_velocity(model, pre.q, pre.qd, pre.swing_leg)[1]


def _accel(model, q, qd, tau, rows):
    qdd, _, ok = K.contact_accel(q, qd, tau, rows, *_dyn_args(model))
    if not ok:
        raise SingularConstraint("contact KKT matrix is rank deficient")
    return qdd


def _stabilize(model, q, qd, rows, ref):
    """Project the state back onto the contact manifold (one Newton step + velocity projection)."""
    M = mass_matrix(model, q)
    pos, J, _ = K.constraint_rows(q, qd, rows, *_args(model))
    MinvJT = np.linalg.solve(M, J.T)
    S = J @ MinvJT
    q = q + MinvJT @ np.linalg.solve(S, ref - pos)
    _, J, _ = K.constraint_rows(q, qd, rows, *_args(model))
    MinvJT = np.linalg.solve(M, J.T)
    qd = qd - MinvJT @ np.linalg.solve(J @ MinvJT, J @ qd)
    return q, qd


def swing_touchdown(model: RobotModel, state: FullState, terrain: TerrainSpec,
                    threshold: float = TOUCHDOWN_THRESHOLD) -> bool:
    """True when any swing ground point is at/below the terrain and moving down."""
    leg = state.swing_leg
    link = model.feet[leg].link
    for pt in model.ground_points(leg):
        p, v, _, _ = point_state(model, state.q, state.qd, link, pt)
        if p[1] <= terrain.height(p[0]) + threshold and v[1] < 0.0:
            return True
    return False


def step(model: RobotModel, state: FullState, u, dt: float = 1e-3,
         terrain: TerrainSpec | None = None, disturbance=None,
         integrator: str = "semi_implicit", min_swing_time: float = 0.0,
         stabilize: bool = True, info: dict | None = None) -> FullState:
    """Advance the hybrid system by ``dt``; returns a new state.

    Continuous phase is integrated with semi-implicit Euler (or classic RK4
    when ``integrator="rk4"``), followed by a projection onto the stance
    contact manifold. If the swing foot then lies on or below the terrain
    while descending, and at least ``min_swing_time`` has elapsed in the
    step, the impact map fires within the same tick; the pre-impact state
    is then stored under ``info["pre_impact"]`` when ``info`` is given.
    """
    terrain = terrain or TerrainSpec()
    u = clamp_torques(model, u)
    rows = model.contact_rows(state.stance_leg)
    ref = state.contact_ref
    if ref is None:
        ref = stance_constraints(model, state.q, state.qd, state.stance_leg)[0]

    def tau_at(q):
        tau = model.B @ u
        if disturbance is not None:
            tau = tau + disturbance_force(model, q, disturbance)
        return tau

    q, qd = state.q, state.qd
    if integrator == "semi_implicit":
        qdd = _accel(model, q, qd, tau_at(q), rows)
        qd1 = qd + dt * qdd
        q1 = q + dt * qd1
    elif integrator == "rk4":
        def f(q_, qd_):
            return qd_, _accel(model, q_, qd_, tau_at(q_), rows)
        k1q, k1v = f(q, qd)
        k2q, k2v = f(q + 0.5 * dt * k1q, qd + 0.5 * dt * k1v)
        k3q, k3v = f(q + 0.5 * dt * k2q, qd + 0.5 * dt * k2v)
        k4q, k4v = f(q + dt * k3q, qd + dt * k3v)
        q1 = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
        qd1 = qd + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    else:
        raise ValueError(f"unknown integrator {integrator!r}")
    if stabilize:
        q1, qd1 = _stabilize(model, q1, qd1, rows, ref)

    nxt = FullState(q1, qd1, state.stance_leg, state.t_step + dt,
                    state.contact_point.copy(), ref.copy())
    if nxt.t_step >= min_swing_time and swing_touchdown(model, nxt, terrain):
        if info is not None:
            info["pre_impact"] = nxt
        return impact_reset(model, nxt)
    return nxt
