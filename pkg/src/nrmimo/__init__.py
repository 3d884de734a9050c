"""Slot-level simulator of 2-stream downlink MIMO over dual-polarized subarrays."""

from .config import ScenarioConfig, TrafficConfig
from .engine import Simulation, StatsRecord, SweepResult, run, sweep
from .phy import RiConfig, RiMode

__all__ = [
    "RiConfig",
    "RiMode",
    "ScenarioConfig",
    "Simulation",
    "StatsRecord",
    "SweepResult",
    "TrafficConfig",
    "run",
    "sweep",
]

__version__ = "0.1.0"
