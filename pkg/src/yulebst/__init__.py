"""Random binary search trees via their level profile and the coupled Yule tree."""
from .constants import ConstantsSet, psi, recentre_height, recentre_saturation, solve_constants
from .profile import (
    CheckpointSchedule,
    LevelProfile,
    StepOutcome,
    TrajectoryRecord,
    checkpoint_schedule,
    new_profile,
    observables,
    run_trajectory,
    sample_leaf_level,
    step,
)
from .rng import RandomStream

__all__ = [
    "CheckpointSchedule", "ConstantsSet", "LevelProfile", "RandomStream", "StepOutcome",
    "TrajectoryRecord", "checkpoint_schedule", "new_profile", "observables", "psi",
    "recentre_height", "recentre_saturation", "run_trajectory", "sample_leaf_level",
    "solve_constants", "step",
]
