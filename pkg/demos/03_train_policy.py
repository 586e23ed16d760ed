"""
Training a high-level policy with PPO
=====================================

The policy observes the reduced state (base offset from the stance foot,
momentum about the contact, speed error, command, slope) and outputs the
swing-foot landing x, torso pitch and base height offset 33 times per
second. The low-level tracker turns those task-space targets into torques at
1 kHz. This script runs a short training so the learning curve can be seen
moving; the bundled policy came from the same loop run for longer
(`hlbiped train --iters 600`).
"""

import sys

import numpy as np

from hlbiped.env import BipedEnv, EnvConfig
from hlbiped.ppo import PPOConfig, train

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 5
cfg = PPOConfig(workers=4, steps_per_iter=2048)
policy, curve = train(lambda: BipedEnv(EnvConfig(train_disturbances=True)), cfg, iters, seed=0,
                      log=print)

# The untrained policy outputs the action midpoint; after training the mean
# action responds to the commanded speed.
for v in (-0.5, 0.0, 0.5, 1.0):
    obs = np.array([0.0, 32.0 * 0.8 * v, 0.0, v, 0.0])
    print(f"v_des {v:+.1f}: normalized action {np.round(policy.act(obs), 3)}")
