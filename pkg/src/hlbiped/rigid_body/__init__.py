"""Planar rigid-body hybrid dynamics for Rabbit and Walker2D."""

from .dynamics import (
    ImpactInfeasible,
    SingularConstraint,
    angular_momentum,
    bias_forces,
    clamp_torques,
    centroidal_momentum,
    com_state,
    contact_dynamics,
    foot_point,
    foot_pitch,
    gravity_vector,
    impact_reset,
    mass_matrix,
    mechanical_energy,
    point_state,
    stance_constraints,
    step,
    swing_touchdown,
)
from .model import ContactSolution, FullState, RobotModel, TerrainSpec, load_model
from .poses import leg_ik, leg_reach, make_state, standing_pose

__all__ = [
    "ContactSolution", "FullState", "clamp_torques", "ImpactInfeasible", "RobotModel", "SingularConstraint",
    "TerrainSpec", "angular_momentum", "bias_forces", "centroidal_momentum", "com_state",
    "contact_dynamics", "foot_pitch", "foot_point", "gravity_vector", "impact_reset", "leg_ik",
    "leg_reach", "load_model", "make_state", "mass_matrix", "mechanical_energy", "point_state",
    "stance_constraints", "standing_pose", "step", "swing_touchdown",
]
