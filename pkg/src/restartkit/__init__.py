"""Restart strategies for Las Vegas algorithms: models, schedules, simulators."""
from .dist import (
    FOREVER,
    DiscreteFinite,
    GeometricSeconds,
    RuntimeDistribution,
    StepOrForever,
    UniformInterval,
    Zeta2,
    from_dict,
)
from .rng import SampleStream
from .strategy import (
    BinSearch,
    ExponentialSchedule,
    FixedSchedule,
    Harmonic,
    LubyCounter,
    PolyLog,
    Zeta2Search,
    make_schedule,
    make_speeds,
)

__version__ = "0.1.0"
