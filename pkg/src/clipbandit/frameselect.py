"""Turning a set of selected arms into concrete keyframes."""
from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._kernels import K
from .stats import StatsTable
from .timeline import Arm


class UnobservedArmWarning(UserWarning):
    pass


@dataclass
class KeyframeSelection:
    frames: list[int]
    per_arm_quota: dict[int, int]
    selected_arms: list[int]
    pulls: int = 0
    frames_seen_fraction: float = 0.0
    raw_pull_fraction: float = 0.0
    unobserved_arms: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def allocate_quota(
    selected_arms: Iterable[int],
    k: int,
    sizes: Mapping[int, int] | None = None,
    means: Mapping[int, float] | None = None,
) -> dict[int, int]:
    """Split a budget of ``k`` keyframes as evenly as possible over the arms.

    The remainder of ``k / len(arms)`` goes one extra frame at a time to arms
    in priority order: highest empirical mean first when ``means`` is given,
    then lowest arm id.  When ``k`` is smaller than the number of arms the
    lowest-priority arms get zero.  Quotas are capped at the arm size
    (``sizes``) and the surplus is spread over the arms that still have room.
    """
    arms = sorted(set(int(a) for a in selected_arms))
    if not arms:
        raise ValueError("no arms selected")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if means is not None:
        arms.sort(key=lambda a: (-means[a], a))
    caps = {a: (sizes[a] if sizes is not None else k) for a in arms}
    quota = dict.fromkeys(arms, 0)
    remaining = min(k, sum(caps.values()))
    # raise every open arm by the same amount; the last few frames go one
    # each in priority order, so open arms never differ by more than one
    while remaining > 0:
        open_arms = [a for a in arms if quota[a] < caps[a]]
        base = remaining // len(open_arms)
        if base == 0:
            for a in open_arms[:remaining]:
                quota[a] += 1
            break
        for a in open_arms:
            add = min(base, caps[a] - quota[a])
            quota[a] += add
            remaining -= add
    return {a: quota[a] for a in sorted(quota)}


def interpolate_rewards(arm: Arm, observations: Sequence[tuple[int, float]]) -> np.ndarray:
    """Score every frame of ``arm`` with the reward of its nearest observed frame.

    Repeated observations of one frame are averaged.  Equidistant frames take
    the earlier observation.  With no observation inside the arm the result
    is the uniform vector ``1/|arm|`` and an :class:`UnobservedArmWarning` is
    issued.
    """
    sums: dict[int, float] = defaultdict(float)
    counts: dict[int, int] = defaultdict(int)
    for frame, reward in observations:
        if frame in arm:
            sums[frame] += reward
            counts[frame] += 1
    if not sums:
        warnings.warn(f"arm {arm.id} has no observations; using uniform scores", UnobservedArmWarning, stacklevel=2)
        return np.full(arm.size, 1.0 / arm.size)
    pos = np.array(sorted(sums), dtype=np.int64)
    vals = np.array([sums[p] / counts[p] for p in pos])
    return K.nearest_fill(arm.size, pos - arm.start, vals)


def sample_frames(arm: Arm, scores, k_a: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``k_a`` distinct frames of ``arm`` with probability proportional to ``scores``.

    Uses exponential keys (Efraimidis-Spirakis): frame i gets key
    ``log(u_i) / w_i`` and the ``k_a`` largest keys win, which gives
    single-draw marginals ``w_i / sum(w)``.  Zero-weight frames only fill
    slots left after every positive-weight frame is taken; an all-zero
    vector is treated as uniform.
    """
    w = np.asarray(scores, dtype=np.float64)
    if w.shape != (arm.size,):
        raise ValueError(f"expected {arm.size} scores, got shape {w.shape}")
    if not 0 <= k_a <= arm.size:
        raise ValueError(f"k_a={k_a} outside [0, {arm.size}]")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("scores must be finite and non-negative")
    if k_a == 0:
        return np.empty(0, dtype=np.int64)
    if not np.any(w > 0):
        w = np.ones_like(w)
    u = rng.random(arm.size)
    with np.errstate(divide="ignore"):
        keys = np.where(w > 0, np.log(u) / np.where(w > 0, w, 1.0), -np.inf)
    positive = int(np.count_nonzero(w > 0))
    if k_a <= positive:
        chosen = np.argpartition(-keys, k_a - 1)[:k_a] if k_a < arm.size else np.arange(arm.size)
    else:
        zeros = np.flatnonzero(w == 0)
        chosen = np.concatenate([np.flatnonzero(w > 0), rng.choice(zeros, k_a - positive, replace=False)])
    return np.sort(chosen + arm.start)


def arm_rng(seed: int, arm_id: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), 0xF4A, int(arm_id)])


def assemble(
    selected_arms: Iterable[int],
    arms: Sequence[Arm],
    stats: StatsTable | Mapping[int, Sequence[tuple[int, float]]],
    k: int,
    seed: int = 0,
    within: str = "weighted",
) -> KeyframeSelection:
    """Allocate quotas, interpolate each arm's rewards and draw its keyframes.

    ``within="uniform"`` ignores the rewards and draws frames uniformly
    inside each arm.
    """
    selected = sorted(set(int(a) for a in selected_arms))
    if isinstance(stats, StatsTable):
        obs = {a: stats.observations[a] for a in selected}
        means = {a: float(stats.means[a]) for a in selected}
    else:
        obs = {a: list(stats.get(a, ())) for a in selected}
        means = {a: (float(np.mean([r for _, r in o])) if o else 0.0) for a, o in obs.items()}
    quota = allocate_quota(selected, k, sizes={a: arms[a].size for a in selected}, means=means)
    frames: list[int] = []
    unobserved = []
    for a in selected:
        if quota[a] == 0:
            continue
        arm = arms[a]
        if within == "uniform":
            scores = np.ones(arm.size)
        else:
            if not any(f in arm for f, _ in obs[a]):
                unobserved.append(a)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UnobservedArmWarning)
                scores = interpolate_rewards(arm, obs[a])
        frames.extend(int(f) for f in sample_frames(arm, scores, quota[a], arm_rng(seed, a)))
    frames.sort()
    if len(set(frames)) != len(frames):
        raise AssertionError("duplicate keyframes across arms")
    notes = []
    if len(frames) < k:
        notes.append(f"only {len(frames)} frames available in the selected arms for k={k}")
    if unobserved:
        notes.append(f"arms {unobserved} had no observations; sampled uniformly")
    return KeyframeSelection(frames, quota, selected, unobserved_arms=unobserved, warnings=notes)
