"""Model-based ALIP footstep planner wrapped as an environment policy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..alip import AlipParams, AlipState, alip_flow, alip_planner_step
from ..gait import HLAction, nominal_touchdown_time
from ..rigid_body import angular_momentum, com_state, standing_pose
from ..rigid_body.model import RobotModel
from ..rigid_body.poses import leg_joint_angles


def com_offset(model: RobotModel, stance: str, stance_x: float, swing_x: float,
               height: float | None = None) -> float:
    """Horizontal CoM minus base position for a pose with both soles at given base-relative x."""
    h = model.nominal_height if height is None else height
    q = np.zeros(model.n_dof)
    q[1] = h
    swing = "right" if stance == "left" else "left"
    q[model.leg_coords(stance)] = leg_joint_angles(model, stance, (stance_x, -h))
    q[model.leg_coords(swing)] = leg_joint_angles(model, swing, (swing_x, -h))
    return float(com_state(model, q)[0][0] - q[0])


@dataclass
class AlipBaseline:
    """One-step dead-beat ALIP planner driving the swing-foot target.

    ``feed="com"`` uses the CoM (the model's own state) and converts the
    CoM-relative placement into the base-relative action using the CoM
    offset predicted for the touchdown pose. ``feed="base"`` feeds the base
    position directly. ``T`` is the expected touchdown time of the nominal
    swing (slightly before the trajectory end, which lands below ground).
    """

    model: RobotModel
    feed: str = "com"
    T: float | None = None
    H: float | None = None
    offset_iters: int = 3

    def __post_init__(self):
        if self.feed not in ("com", "base"):
            raise ValueError(f"unknown feed {self.feed!r}")
        m = self.model
        H = self.H
        if H is None:
            H = float(com_state(m, standing_pose(m))[0][1] - standing_pose(m)[1] + m.nominal_height)
        T = nominal_touchdown_time() if self.T is None else self.T
        self.params = AlipParams(m=m.total_mass, H=H, T=T)

    def __call__(self, obs, env) -> HLAction:
        m, s = self.model, env.state
        L = angular_momentum(m, s, s.contact_point)
        if self.feed == "base":
            p = s.q[0] - s.contact_point[0]
            a = alip_planner_step(AlipState(p, L), env.v_des, self.params, t_step=s.t_step)
            return HLAction(a, 0.0, 0.0)
        pcx = com_state(m, s)[0][0]
        cur = AlipState(pcx - s.contact_point[0], L)
        a = alip_planner_step(cur, env.v_des, self.params, t_step=s.t_step)
        p_end = alip_flow(cur, max(self.params.T - s.t_step, 0.0), self.params).p
        d = pcx - s.q[0]
        for _ in range(self.offset_iters):
            try:
                d = com_offset(m, s.stance_leg, -(p_end - d), a + d)
            except ValueError:
                break
        return HLAction(float(np.clip(a + d, -0.6, 0.6)), 0.0, 0.0)
