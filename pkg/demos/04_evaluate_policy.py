"""
What the bundled policy can do
==============================

The bundled Rabbit policy was trained on flat and 0-10 degree slopes with
random torso pushes. Here it tracks a speed profile with two different
low-level trackers, recovers from pushes and walks on slopes it never saw.
The same numbers come out of `hlbiped eval`, `hlbiped perturb` and
`hlbiped slope-grid` as CSV tables.
"""

from hlbiped import experiments as ex
from hlbiped.env import EnvConfig
from hlbiped.ppo import load_checkpoint

policy = load_checkpoint(ex.bundled_policy_path("rabbit")).as_env_policy(None)
profile = ex.DEFAULT_PROFILE

# Same policy, two trackers: the planner does not care how targets are tracked.
for name, cfg in (("FL", EnvConfig()), ("ID-QP", EnvConfig(controller="idqp"))):
    r = ex.evaluate(policy, cfg, profile, seed=0)
    errs = " ".join(f"{s[2]:+.1f}:{s[3]:.3f}" for s in r.segments)
    print(f"{name:>6}: fell {r.fell}  per-segment |error| {errs}")

# Torso pushes of 0.15 s while walking at 0.5 m/s.
for row in ex.perturb_grid(policy, EnvConfig(), (-40.0, 40.0), trials=3):
    print(f"push {row[0]:+.0f} N: survived {row[2]}/{row[4]}, recovered {row[3]}/{row[4]}")

# Slopes, including a negative one outside the training range.
for row in ex.slope_grid(policy, EnvConfig(), speeds=(0.5,), alphas_deg=(-5.0, 0.0, 10.0)):
    print(f"v {row[0]:+.1f} on {row[1]:+.0f} deg: mean |error| {row[2]:.3f}, fell {row[4]}")
