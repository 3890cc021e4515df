"""Opportunistic-network simulator with an exposed-mode wormhole attack and a
Z-score / neighbor-table wormhole auditor."""

from .config import DetectorParams, Protocol, ScenarioConfig, ZVariant, load_config
from .detector import DetectionReport, detect
from .engine import run_simulation
from .trace import EventTrace

__all__ = [
    "DetectorParams",
    "DetectionReport",
    "EventTrace",
    "Protocol",
    "ScenarioConfig",
    "ZVariant",
    "detect",
    "load_config",
    "run_simulation",
]
