"""Task-space tracking controllers."""

from .controllers import (
    Controller,
    DecouplingSingular,
    GainSet,
    OutputBundle,
    QPWeights,
    commanded_accel,
    constrained_affine,
    fl_controller,
    idqp_controller,
    idqp_problem,
)
from .outputs import OutputJacobians, actual_outputs, output_eval, swing_output_point
from .qp import QPInfeasible, QPResult, kkt_residual, qp_solve

__all__ = [
    "Controller", "DecouplingSingular", "GainSet", "OutputBundle", "OutputJacobians",
    "QPInfeasible", "QPResult", "QPWeights", "actual_outputs", "commanded_accel",
    "constrained_affine", "fl_controller", "idqp_controller", "idqp_problem", "kkt_residual",
    "output_eval", "qp_solve", "swing_output_point",
]
