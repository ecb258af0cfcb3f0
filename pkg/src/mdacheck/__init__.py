"""Runtime, explorer and property verifier for a multi-agent data-analysis system."""

from .config import SystemConfig, load, loads, save, dumps
from .explore import StateGraph, explore
from .intervals import IntervalSet
from .runtime import System, run_random
from .synth import SynthParams, build_synthetic, build_venue_fixture
from .verifier import (
    PropertyVerdict,
    check_bounded_termination,
    check_controller_correctness,
    check_operability,
    quiescence_oracle,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "IntervalSet",
    "PropertyVerdict",
    "StateGraph",
    "SynthParams",
    "System",
    "SystemConfig",
    "build_synthetic",
    "build_venue_fixture",
    "check_bounded_termination",
    "check_controller_correctness",
    "check_operability",
    "dumps",
    "explore",
    "load",
    "loads",
    "quiescence_oracle",
    "run_random",
    "save",
    "verify",
]
