"""Per-arm running statistics, empirical Bernstein radii and the top-m oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._kernels import K


@dataclass
class ArmStats:
    """Streaming mean/variance of one arm's rewards (Welford's recurrence)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    observations: list[tuple[int, float]] = field(default_factory=list)

    def variance(self) -> float:
        # population variance; a single observation has zero spread
        if self.count <= 1:
            return 0.0
        return max(self.m2 / self.count, 0.0)

    def update(self, reward: float, frame: int = -1) -> "ArmStats":
        return update(self, reward, frame)


@dataclass(frozen=True)
class ConfidenceBound:
    lower: float
    upper: float
    radius: float


def _check_reward(reward: float) -> float:
    r = float(reward)
    if not (0.0 <= r <= 1.0):
        raise ValueError(f"reward {reward!r} outside [0, 1]")
    return r


def update(stats: ArmStats, reward: float, frame: int = -1) -> ArmStats:
    """Fold one reward into ``stats`` in place and return it."""
    r = _check_reward(reward)
    stats.count += 1
    delta = r - stats.mean
    stats.mean += delta / stats.count
    stats.m2 += delta * (r - stats.mean)
    stats.observations.append((int(frame), r))
    return stats


def bernstein_radius(stats: ArmStats, n_total: int) -> float:
    """sqrt(2 var ln n / max(1, N)) + 3 ln n / max(1, N).

    Unpulled arms count as zero variance with N = 1; ``n_total == 1`` gives 0.
    """
    return radius_from_moments(stats.count, stats.variance(), n_total)


def radius_from_moments(count: int, variance: float, n_total: int) -> float:
    if n_total < 1:
        raise ValueError(f"n_total must be >= 1, got {n_total}")
    ln_n = math.log(n_total)
    d = max(1, count)
    v = variance if count > 0 else 0.0
    return math.sqrt(2.0 * v * ln_n / d) + 3.0 * ln_n / d


def bounds(stats: ArmStats, n_total: int) -> ConfidenceBound:
    """Unclamped lower/upper confidence bounds around the empirical mean."""
    beta = bernstein_radius(stats, n_total)
    return ConfidenceBound(stats.mean - beta, stats.mean + beta, beta)


def top_m(values: Sequence[float], m: int) -> set[int]:
    """Indices of the ``m`` largest values; ties go to the lower index."""
    values = np.asarray(values, dtype=np.float64)
    if not 1 <= m <= values.size:
        raise ValueError(f"m={m} out of range for {values.size} values")
    order = np.argsort(-values, kind="stable")
    return {int(i) for i in order[:m]}


class StatsTable:
    """Array-backed statistics for all arms of one selection run.

    Holds the same quantities as a list of :class:`ArmStats` but keeps
    counts, means and sums of squared deviations in numpy arrays so the
    selection kernels can read them without copying.
    """

    def __init__(self, n_arms: int):
        self.counts = np.zeros(n_arms, dtype=np.int64)
        self.means = np.zeros(n_arms, dtype=np.float64)
        self.m2 = np.zeros(n_arms, dtype=np.float64)
        self.observations: list[list[tuple[int, float]]] = [[] for _ in range(n_arms)]
        self.n_total = 0

    def __len__(self):
        return self.counts.size

    def update(self, arm: int, frame: int, reward: float) -> None:
        r = _check_reward(reward)
        n = self.counts[arm] + 1
        self.counts[arm] = n
        self.n_total += 1
        mean = self.means[arm]
        delta = r - mean
        mean += delta / n
        self.means[arm] = mean
        self.m2[arm] += delta * (r - mean)
        self.observations[arm].append((int(frame), r))

    def update_batch(self, arms, frames, rewards) -> None:
        """Apply a batch of pulls in (arm, frame) order, so results do not
        depend on the order the batch was scored in."""
        arms = np.asarray(arms, dtype=np.int64)
        frames = np.asarray(frames, dtype=np.int64)
        rewards = np.asarray(rewards, dtype=np.float64)
        for i in np.lexsort((frames, arms)):
            self.update(int(arms[i]), int(frames[i]), float(rewards[i]))

    def variances(self) -> np.ndarray:
        v = np.where(self.counts > 1, self.m2 / np.maximum(self.counts, 1), 0.0)
        return np.maximum(v, 0.0)

    def radii(self, n_total: int | None = None) -> np.ndarray:
        n = self.n_total if n_total is None else n_total
        return K.radii(self.counts, self.variances(), max(n, 1))

    def arm(self, a: int) -> ArmStats:
        """Snapshot of one arm as an :class:`ArmStats`."""
        return ArmStats(int(self.counts[a]), float(self.means[a]), float(self.m2[a]), list(self.observations[a]))
