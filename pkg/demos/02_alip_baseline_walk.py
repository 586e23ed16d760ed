"""
Walking with the model-based ALIP planner
=========================================

Before any learning, a one-step dead-beat ALIP planner chooses the swing
foot placement from the current CoM position and momentum. It walks well at
low speed and degrades as the commanded speed grows, because the model
ignores the legs' own dynamics.
"""

from hlbiped import experiments as ex
from hlbiped.env import EnvConfig

cfg = EnvConfig(robot="rabbit", controller="fl")
for v in (0.0, 0.3, 0.6, 1.0):
    r = ex.alip_baseline(cfg, [(0.0, v)], duration=10.0)
    seg = r.segments[0]
    print(f"v_des {v:+.1f} m/s  mean v_bar {seg[4]:+.3f}  mean |error| {seg[3]:.3f}  "
          f"fell {r.fell}  steps {len(r.touchdowns)}")

# A speed profile with steps up and down, logged per high-level step.
r = ex.alip_baseline(cfg, ex.DEFAULT_PROFILE)
print("\nprofile segments (t0, t1, v_des, mean |error|, mean v_bar):")
for seg in r.segments:
    print("  " + "  ".join(f"{x:+.3f}" for x in seg))
