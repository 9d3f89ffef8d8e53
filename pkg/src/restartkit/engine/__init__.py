from .fast import compile_restart
from .restart import NO_CAPS, Caps, RunInstance, SimOutcome, run_cached, run_restart
from .wide import run_wide, run_wide_as_restart

__all__ = [
    "Caps", "NO_CAPS", "RunInstance", "SimOutcome",
    "compile_restart", "run_cached", "run_restart", "run_wide", "run_wide_as_restart",
]
