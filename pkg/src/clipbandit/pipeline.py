"""End-to-end keyframe selection for one video."""
from __future__ import annotations

from .frameselect import KeyframeSelection, assemble
from .selector import SelectionConfig, SelectionTrace, iterative_select, two_stage_select
from .timeline import VideoMeta, frames_seen_fraction, partition_timeline

ALGORITHMS = ("two-stage", "iterative")


def select_keyframes(
    provider, cfg: SelectionConfig, algorithm: str = "two-stage"
) -> tuple[KeyframeSelection, SelectionTrace | None]:
    """Partition the provider's video, pick arms, then draw ``cfg.k`` keyframes.

    When ``cfg.k`` is at least the video length every frame is returned
    without scoring anything.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    meta = VideoMeta(provider.total_frames, provider.fps)
    arms = partition_timeline(meta, cfg.clip_seconds)
    if cfg.k >= meta.total_frames:
        sel = KeyframeSelection(
            frames=list(range(meta.total_frames)),
            per_arm_quota={a.id: a.size for a in arms},
            selected_arms=[a.id for a in arms],
            warnings=[f"k={cfg.k} >= video length {meta.total_frames}; returning every frame"],
        )
        return sel, None
    select = two_stage_select if algorithm == "two-stage" else iterative_select
    chosen, trace = select(provider, arms, cfg)
    sel = assemble(chosen, arms, trace.stats, cfg.k, seed=cfg.seed)
    sel.pulls = trace.pulls
    sel.frames_seen_fraction = frames_seen_fraction(trace.ledger, meta)
    sel.raw_pull_fraction = frames_seen_fraction(trace.ledger, meta, distinct=False)
    return sel, trace
