"""Proximal policy optimization for the high-level planner."""

from .algo import (
    CURVE_COLUMNS, NonFiniteLoss, Policy, PPOConfig, RolloutBatch, Worker, gae,
    gaussian_logprob, ppo_update, sample_action, train, write_curve,
)
from .checkpoint import CheckpointError, from_bytes, load_checkpoint, save_checkpoint, to_bytes
from .net import MLP, Adam
from .normalizer import Normalizer

__all__ = [
    "CURVE_COLUMNS", "MLP", "Adam", "CheckpointError", "NonFiniteLoss", "Normalizer", "Policy",
    "PPOConfig", "RolloutBatch", "Worker", "from_bytes", "gae", "gaussian_logprob",
    "load_checkpoint", "ppo_update", "sample_action", "save_checkpoint", "to_bytes", "train",
    "write_curve",
]
