"""
How well does the ALIP model predict the robot's momentum?
===========================================================

The ALIP reduced model predicts the angular momentum about the stance foot
at the end of each step. On a robot that matches the model's assumptions
(thin massless-looking legs, stiff tracking) the prediction is close; on the
real Rabbit geometry with a softer QP tracker it drifts. This gap is the
motivation for learning the footstep planner instead of deriving it.
"""

import numpy as np

from hlbiped import experiments as ex
from hlbiped.alip import AlipParams, AlipState, alip_flow, orbital_energy

# The reduced model has a closed-form flow: a hyperbolic rotation of (p, L).
P = AlipParams(m=32.0, H=0.8)
s = AlipState(-0.1, 8.0)
for t in (0.0, 0.2, 0.4):
    f = alip_flow(s, t, P)
    print(f"t={t:.1f}s  p={f.p:+.4f} m  L={f.L:7.3f}  orbital energy={orbital_energy(f, P):.6f}")

# Walk 20 steps at 0.3 m/s with the ALIP planner on both robot variants and
# compare predicted vs realised touchdown momentum, in velocity units L/(mH).
for variant in ("self", "ideal", "nonideal"):
    rows = ex.fig2_study(variant, v_des=0.3, n_steps=20)
    print(f"\n{variant:>9}: mean |predicted - actual| = {ex.mean_prediction_error(rows):.4f} m/s")
    for k, p, a in rows[:5]:
        print(f"   step {int(k):2d}  predicted {p:+.4f}  actual {a:+.4f}")
