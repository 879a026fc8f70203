"""Event-triggered leader-follower consensus under communication and
actuator faults: gain synthesis, deterministic simulation, post-run
analysis."""

from . import analysis, config, faults, numerics, presets, runtime, simulator, synthesis, topology, triggers

__all__ = [
    "analysis",
    "config",
    "faults",
    "numerics",
    "presets",
    "runtime",
    "simulator",
    "synthesis",
    "topology",
    "triggers",
]

__version__ = "0.1.0"
