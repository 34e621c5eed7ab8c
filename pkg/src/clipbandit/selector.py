"""Arm selection: the sequential optimistic loop and its two-stage batched form.

Both selectors treat each clip as an arm; pulling an arm scores one frame of
the clip chosen uniformly among the frames not yet scored (once a clip is
exhausted, frames are re-drawn uniformly with replacement).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._kernels import K
from .stats import ArmStats, StatsTable, bounds, top_m
from .timeline import Arm, BudgetLedger

DEFAULT_K = 64


class ConfigError(ValueError):
    """Selection parameters that cannot be used for the video at hand."""


@dataclass(frozen=True)
class SelectionConfig:
    """Knobs for arm selection and keyframe assembly.

    ``m=None`` means "derive from k": ``max(1, min(M, ceil(k / 4), coarse size))``.
    ``max_iterations=None`` caps the sequential selector at ``50 * M`` refinement steps.
    """

    k: int = DEFAULT_K
    clip_seconds: float = 16.0
    alpha: float = 0.25
    q: int = 4
    z: int = 15
    m: int | None = None
    pulls_per_iteration: int = 1
    max_iterations: int | None = None
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Checks that need no knowledge of the video."""
        def _int_at_least(name, lo):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}, got {v!r}")

        for name in ("k", "q", "z", "pulls_per_iteration"):
            _int_at_least(name, 1)
        if self.m is not None:
            _int_at_least("m", 1)
        if self.max_iterations is not None:
            _int_at_least("max_iterations", 0)
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not (self.clip_seconds > 0 and math.isfinite(self.clip_seconds)):
            raise ConfigError(f"clip_seconds must be positive, got {self.clip_seconds!r}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")

    def coarse_size(self, n_arms: int) -> int:
        # alpha * M as a float can land a hair above an integer (0.1 * 230)
        return min(n_arms, max(1, math.ceil(self.alpha * n_arms - 1e-9)))

    def resolve_m(self, n_arms: int) -> int:
        if self.m is None:
            return max(1, min(n_arms, math.ceil(self.k / 4), self.coarse_size(n_arms)))
        if self.m > n_arms:
            raise ConfigError(f"m={self.m} exceeds the number of arms M={n_arms}")
        return self.m

    def check_for(self, n_arms: int) -> int:
        """Validate against a video with ``n_arms`` clips and return the resolved m."""
        m = self.resolve_m(n_arms)
        if self.coarse_size(n_arms) < m:
            raise ConfigError(
                f"coarse set ceil(alpha*M)={self.coarse_size(n_arms)} is smaller than m={m}"
            )
        return m

    def iteration_cap(self, n_arms: int) -> int:
        return 50 * n_arms if self.max_iterations is None else self.max_iterations

    def to_dict(self) -> dict:
        return asdict(self)


class TraceRound(NamedTuple):
    round: int
    arm: int
    frame: int
    reward: float
    top: tuple[int, ...] | None


@dataclass
class SelectionTrace:
    rounds: list[TraceRound] = field(default_factory=list)
    terminated_by: str = ""
    coarse: tuple[int, ...] = ()
    iterations: int = 0
    stats: StatsTable | None = field(default=None, repr=False, compare=False)
    ledger: BudgetLedger | None = field(default=None, repr=False, compare=False)

    @property
    def pulls(self) -> int:
        return len(self.rounds)


class FramePicker:
    """Chooses which frame of an arm to score next.

    Each arm owns an RNG stream derived from ``(seed, arm id)``, so the
    frames drawn for one arm do not depend on how pulls of other arms are
    interleaved.
    """

    def __init__(self, arms: Sequence[Arm], seed: int):
        self.arms = list(arms)
        self.seed = int(seed)
        self._rngs: dict[int, np.random.Generator] = {}
        self._perm: dict[int, np.ndarray] = {}
        self._cursor: dict[int, int] = {}

    def _rng(self, a: int) -> np.random.Generator:
        rng = self._rngs.get(a)
        if rng is None:
            rng = self._rngs[a] = np.random.default_rng([self.seed, 0xA53, a])
        return rng

    def pick(self, a: int, count: int = 1) -> np.ndarray:
        arm = self.arms[a]
        if a not in self._perm:
            self._perm[a] = arm.start + self._rng(a).permutation(arm.size)
            self._cursor[a] = 0
        perm = self._perm[a]
        c = self._cursor[a]
        fresh = perm[c : c + count]
        self._cursor[a] = c + fresh.size
        if fresh.size == count:
            return fresh
        extra = self._rng(a).integers(arm.start, arm.end + 1, size=count - fresh.size)
        return np.concatenate([fresh, extra])


class _Run:
    def __init__(self, provider, arms: Sequence[Arm], cfg: SelectionConfig):
        if not arms:
            raise ConfigError("no arms to select from")
        if arms[-1].end >= provider.total_frames:
            raise ConfigError("arms extend past the provider's last frame")
        self.provider = provider
        self.arms = list(arms)
        self.cfg = cfg
        self.m = cfg.check_for(len(arms))
        self.table = StatsTable(len(arms))
        self.ledger = BudgetLedger()
        self.trace = SelectionTrace(stats=self.table, ledger=self.ledger)
        self.picker = FramePicker(arms, cfg.seed)

    def pull_batch(self, arm_ids: Sequence[int], times: int) -> None:
        arm_list = np.repeat(np.asarray(arm_ids, dtype=np.int64), times)
        frames = np.concatenate([self.picker.pick(int(a), times) for a in arm_ids])
        rewards = np.asarray(self.provider.score_many(frames), dtype=np.float64)
        order = np.lexsort((frames, arm_list))
        n0 = len(self.trace.rounds)
        for j, i in enumerate(order):
            a, f, r = int(arm_list[i]), int(frames[i]), float(rewards[i])
            self.table.update(a, f, r)
            self.ledger.record(a, f)
            self.trace.rounds.append(TraceRound(n0 + j + 1, a, f, r, None))

    def pull_one(self, a: int, top: tuple[int, ...]) -> None:
        f = int(self.picker.pick(a, 1)[0])
        r = self.provider.score(f)
        self.table.update(a, f, r)
        self.ledger.record(a, f)
        self.trace.rounds.append(TraceRound(len(self.trace.rounds) + 1, a, f, float(r), top))


def iterative_select(provider, arms: Sequence[Arm], cfg: SelectionConfig) -> tuple[set[int], SelectionTrace]:
    """Sequential optimistic top-m identification.

    After ``q`` pulls of every arm, repeat: take the empirical top-m set,
    shrink its members by their radius and inflate the rest; if the top-m of
    these perturbed scores is the same set, stop.  Otherwise pull the arm
    with the largest radius among those on which the two sets disagree
    (lowest id on ties).  Stops early with ``terminated_by="iteration_cap"``
    after ``cfg.iteration_cap(M)`` refinement steps.
    """
    run = _Run(provider, arms, cfg)
    run.pull_batch(range(len(arms)), cfg.q)
    table = run.table
    cap = cfg.iteration_cap(len(arms))
    it = 0
    while True:
        stop, p, top_mask = K.optimistic_step(table.counts, table.means, table.m2, table.n_total, run.m)
        top = tuple(np.flatnonzero(top_mask).tolist())
        if stop or it >= cap:
            run.trace.terminated_by = "separation" if stop else "iteration_cap"
            run.trace.iterations = it
            return set(top), run.trace
        for _ in range(cfg.pulls_per_iteration):
            run.pull_one(p, top)
        it += 1


def two_stage_select(
    provider, arms: Sequence[Arm], cfg: SelectionConfig, optimistic: bool = True
) -> tuple[set[int], SelectionTrace]:
    """Batched coarse-to-fine arm selection.

    Stage I pulls every arm ``q`` times and ranks arms by the optimistic
    score mean + radius; the best ``ceil(alpha * M)`` form the coarse set.
    Stage II pulls each coarse arm ``z`` more times.  The result is the top
    ``m`` arms by plain empirical mean over all arms.

    ``optimistic=False`` ranks the coarse set by the empirical mean alone
    (the radius-free ablation); the pull budget is unchanged.
    """
    run = _Run(provider, arms, cfg)
    M = len(arms)
    run.pull_batch(range(M), cfg.q)
    table = run.table
    score = table.means + table.radii(table.n_total) if optimistic else table.means.copy()
    coarse = sorted(top_m(score, cfg.coarse_size(M)))
    run.trace.coarse = tuple(coarse)
    run.pull_batch(coarse, cfg.z)
    run.trace.terminated_by = "two_stage_complete"
    return top_m(table.means, run.m), run.trace


def coarse_only_select(provider, arms: Sequence[Arm], cfg: SelectionConfig) -> tuple[set[int], SelectionTrace]:
    """Stage I alone: ``q`` pulls per arm, then the top-m arms by optimistic score."""
    run = _Run(provider, arms, cfg)
    run.pull_batch(range(len(arms)), cfg.q)
    table = run.table
    chosen = top_m(table.means + table.radii(table.n_total), run.m)
    run.trace.coarse = tuple(sorted(chosen))
    run.trace.terminated_by = "coarse_only"
    return chosen, run.trace


def check_separation(stats_all, current_top, n_total: int) -> bool:
    """True when every arm in ``current_top`` has a lower bound strictly above
    the upper bound of every arm outside it."""
    if isinstance(stats_all, StatsTable):
        stats_all = [stats_all.arm(a) for a in range(len(stats_all))]
    stats_all = list(stats_all)
    inside = set(current_top)
    if not inside:
        raise ValueError("current_top must be non-empty")
    outside = [a for a in range(len(stats_all)) if a not in inside]
    if not outside:
        return True
    min_lcb = min(bounds(stats_all[a], n_total).lower for a in inside)
    max_ucb = max(bounds(stats_all[a], n_total).upper for a in outside)
    return max_ucb < min_lcb


def total_pulls_two_stage(n_arms: int, cfg: SelectionConfig) -> int:
    return n_arms * cfg.q + cfg.coarse_size(n_arms) * cfg.z


__all__ = [
    "ArmStats",
    "ConfigError",
    "FramePicker",
    "SelectionConfig",
    "SelectionTrace",
    "TraceRound",
    "check_separation",
    "coarse_only_select",
    "iterative_select",
    "total_pulls_two_stage",
    "two_stage_select",
]
