"""Budgeted keyframe selection with clip-level bandits."""
from ._kernels import BACKEND
from .frameselect import KeyframeSelection, allocate_quota, assemble, interpolate_rewards, sample_frames
from .pipeline import select_keyframes
from .providers import (
    ScoreFileError,
    ScoreFileProvider,
    SyntheticProvider,
    SyntheticSpec,
    generate_process,
    load_scores,
)
from .selector import (
    ConfigError,
    SelectionConfig,
    SelectionTrace,
    check_separation,
    iterative_select,
    two_stage_select,
)
from .stats import ArmStats, ConfidenceBound, bernstein_radius, bounds, top_m, update
from .timeline import Arm, BudgetLedger, VideoMeta, frames_seen_fraction, partition_timeline

__version__ = "0.1.0"
