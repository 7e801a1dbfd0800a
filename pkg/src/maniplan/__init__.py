"""Deterministic blackboard multi-agent simulator: co-operating agents steer a
simplified manikin to a pose from which a target is visible under ergonomic
constraints, with a human operator in the loop."""

__version__ = "0.1.0"

from . import agents, blackboard, geometry, manikin, scenario_io  # noqa: F401
