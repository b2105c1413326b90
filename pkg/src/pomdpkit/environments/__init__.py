"""Benchmark POMDPs, each implementing the generative environment contract."""

from .lightdark import LightDark, LightDarkConfig
from .metrics import safety_metrics
from .mountaincar import MountainCar, MountainCarConfig
from .rocksample import RockSample, RockSampleConfig, RockSampleState
from .tiger import Tiger, TigerConfig

__all__ = [
    "LightDark",
    "LightDarkConfig",
    "MountainCar",
    "MountainCarConfig",
    "RockSample",
    "RockSampleConfig",
    "RockSampleState",
    "Tiger",
    "TigerConfig",
    "safety_metrics",
]
