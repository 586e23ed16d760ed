"""Walking MDP around the simulator, gait generator and trackers."""

from .baseline import AlipBaseline
from .core import (
    ACT_DIM, LOG_COLUMNS, OBS_DIM, REWARD_WEIGHTS_2D, BipedEnv, EnvConfig, EpisodeConfig,
    InvalidConfig, StepResult, VelocityTracker, average_velocity, reward, reward_terms,
    run_episode, terrain_height,
)

__all__ = [
    "ACT_DIM", "LOG_COLUMNS", "OBS_DIM", "REWARD_WEIGHTS_2D", "AlipBaseline", "BipedEnv",
    "EnvConfig", "EpisodeConfig", "InvalidConfig", "StepResult", "VelocityTracker",
    "average_velocity", "reward", "reward_terms", "run_episode", "terrain_height",
]
