"""Hierarchical ALIP-inspired planning and task-space control for planar bipeds."""

__version__ = "0.1.0"
