"""Closed-form leg inverse kinematics and reference poses."""

from __future__ import annotations

import math

import numpy as np

from .dynamics import foot_point, stance_constraints
from .model import FullState, RobotModel, TerrainSpec


def leg_ik(dx: float, dz: float, thigh: float, shin: float) -> tuple[float, float]:
    """Absolute thigh angle and knee angle placing the shin tip at (dx, dz) from the hip.

    Returns the knee-forward branch (knee angle >= 0).
    """
    d2 = dx * dx + dz * dz
    ck = (d2 - thigh**2 - shin**2) / (2 * thigh * shin)
    if ck > 1.0 + 1e-12:
        raise ValueError(f"target at {math.sqrt(d2):.3f} m is beyond leg reach")
    knee = math.acos(min(1.0, max(-1.0, ck)))
    psi = math.atan2(-dx, -dz)
    thigh_abs = psi - math.atan2(shin * math.sin(knee), thigh + shin * math.cos(knee))
    return thigh_abs, knee


def leg_joint_angles(model: RobotModel, leg: str, rel_sole, pitch: float = 0.0,
                     foot_angle: float = 0.0) -> list[float]:
    """Joint angles of one leg putting its sole point at ``rel_sole`` from the hip."""
    coords = model.leg_coords(leg)
    thigh = model.links[_link_of(model, coords[0])]
    shin = model.links[_link_of(model, coords[1])]
    tx, tz = float(rel_sole[0]), float(rel_sole[1])
    if model.foot_type == "flat":
        sx, sz = model.feet[leg].sole
        c, s = math.cos(foot_angle), math.sin(foot_angle)
        tx -= sx * c + sz * s
        tz -= -sx * s + sz * c
    thigh_abs, knee = leg_ik(tx, tz, thigh.length, shin.length)
    angles = [thigh_abs - pitch, knee]
    if model.foot_type == "flat":
        angles.append(foot_angle - thigh_abs - knee)
    return angles


def _link_of(model: RobotModel, coord: int) -> int:
    return int(np.flatnonzero(model.coord == coord)[0])


def standing_pose(model: RobotModel, half_stride: float = 0.05, height: float | None = None,
                  pitch: float = 0.0, alpha: float = 0.0, stance_leg: str = "left") -> np.ndarray:
    """Double-support configuration: stance sole at x = -half_stride, swing sole at +half_stride.

    The base sits above x = 0 at ``height`` above the terrain there.
    """
    h = model.nominal_height if height is None else height
    terrain = TerrainSpec(alpha)
    q = np.zeros(model.n_dof)
    q[0] = 0.0
    q[1] = h + terrain.height(0.0)
    q[2] = pitch
    swing = "right" if stance_leg == "left" else "left"
    for leg, x in ((stance_leg, -half_stride), (swing, half_stride)):
        rel = (x, terrain.height(x) - q[1])
        q[model.leg_coords(leg)] = leg_joint_angles(model, leg, rel, pitch, -alpha)
    return q


def make_state(model: RobotModel, q, qd=None, stance_leg: str = "left", t_step: float = 0.0) -> FullState:
    """FullState with the contact bookkeeping taken from the current stance foot."""
    q = np.asarray(q, dtype=float).copy()
    qd = np.zeros_like(q) if qd is None else np.asarray(qd, dtype=float).copy()
    p, _, _, _ = foot_point(model, q, stance_leg)
    ref, _, _ = stance_constraints(model, q, qd, stance_leg)
    return FullState(q, qd, stance_leg, t_step, p.copy(), ref)


def leg_reach(model: RobotModel, margin: float = 0.97) -> float:
    """Usable hip-to-sole distance (a fraction of the straight-leg length)."""
    coords = model.leg_coords("left")
    L = sum(model.links[_link_of(model, c)].length for c in coords[:2])
    if model.foot_type == "flat":
        L += -model.feet["left"].sole[1]
    return margin * L
