"""Clip-arm partition of a video timeline and pull accounting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

DEFAULT_CLIP_SECONDS = 16.0


@dataclass(frozen=True)
class VideoMeta:
    total_frames: int
    fps: float

    def __post_init__(self):
        if int(self.total_frames) != self.total_frames or self.total_frames < 1:
            raise ValueError(f"total_frames must be a positive integer, got {self.total_frames!r}")
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise ValueError(f"fps must be positive, got {self.fps!r}")

    @property
    def duration_seconds(self) -> float:
        return self.total_frames / self.fps


@dataclass(frozen=True)
class Arm:
    """A clip of consecutive frames ``start..end`` (both inclusive)."""

    id: int
    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"arm {self.id}: start {self.start} > end {self.end}")

    @property
    def size(self) -> int:
        return self.end - self.start + 1

    def frames(self) -> range:
        return range(self.start, self.end + 1)

    def __contains__(self, frame: int) -> bool:
        return self.start <= frame <= self.end


def frames_per_clip(fps: float, clip_seconds: float) -> int:
    # round half up, so 29.97 fps and 30 fps give the same clip length
    return int(math.floor(clip_seconds * fps + 0.5))


def partition_timeline(meta: VideoMeta, clip_seconds: float = DEFAULT_CLIP_SECONDS) -> list[Arm]:
    """Split ``[0, total_frames)`` into consecutive fixed-length clip-arms.

    Every arm spans ``round(clip_seconds * fps)`` frames except possibly the
    last, which keeps whatever remains (at least one frame).

    Raises:
        ValueError: if the clip length rounds to zero frames.
    """
    if not clip_seconds > 0:
        raise ValueError(f"clip_seconds must be positive, got {clip_seconds!r}")
    width = frames_per_clip(meta.fps, clip_seconds)
    if width < 1:
        raise ValueError(
            f"clip of {clip_seconds}s at {meta.fps} fps rounds to {width} frames per clip"
        )
    return [
        Arm(i, start, min(start + width, meta.total_frames) - 1)
        for i, start in enumerate(range(0, meta.total_frames, width))
    ]


def arm_of_frame(arms: list[Arm], frame: int) -> int:
    """Index of the arm containing ``frame`` (arms must come from partition_timeline)."""
    width = arms[0].size
    a = frame // width
    if not (0 <= a < len(arms)) or frame not in arms[a]:
        raise IndexError(f"frame {frame} outside the partition")
    return a


@dataclass
class BudgetLedger:
    """Pull counts per arm, plus the set of distinct frames scored so far."""

    pulls_total: int = 0
    pulls_per_arm: dict[int, int] = field(default_factory=dict)
    distinct_frames: set[int] = field(default_factory=set)

    def record(self, arm: int, frame: int) -> None:
        self.pulls_total += 1
        self.pulls_per_arm[arm] = self.pulls_per_arm.get(arm, 0) + 1
        self.distinct_frames.add(int(frame))

    def record_many(self, arms, frames) -> None:
        for a, f in zip(arms, frames):
            self.record(int(a), int(f))

    def is_consistent(self) -> bool:
        return (
            self.pulls_total == sum(self.pulls_per_arm.values())
            and len(self.distinct_frames) <= self.pulls_total
        )


def frames_seen_fraction(ledger: BudgetLedger, meta: VideoMeta, distinct: bool = True) -> float:
    """Fraction of the video's frames that were scored.

    With ``distinct=True`` (the headline number) repeated scoring of the same
    frame counts once; otherwise every pull counts.
    """
    seen = len(ledger.distinct_frames) if distinct else ledger.pulls_total
    return seen / meta.total_frames
