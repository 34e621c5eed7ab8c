"""Evaluation tools: ACF analysis, brute-force oracles, policies and trial reports."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats as sps

from ._kernels import K
from .frameselect import allocate_quota, assemble, interpolate_rewards, sample_frames
from .pipeline import select_keyframes
from .providers import SyntheticProvider, SyntheticSpec, generate_process
from .selector import (
    SelectionConfig,
    coarse_only_select,
    iterative_select,
    total_pulls_two_stage,
    two_stage_select,
)
from .stats import top_m
from .timeline import Arm, BudgetLedger, VideoMeta, frames_seen_fraction, partition_timeline

POLICIES = (
    "two-stage",
    "iterative",
    "uniform",
    "topk-full",
    "topk-prefilter",
    "coarse-only",
    "random-probe",
    "mean-coarse",
)


# ---------------------------------------------------------------------------
# autocorrelation
# ---------------------------------------------------------------------------

@dataclass
class AcfCurve:
    lags_seconds: np.ndarray
    median: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    half_life_seconds: float | None
    n_curves: int
    n_skipped: int = 0

    def to_csv(self) -> str:
        lines = ["lag_seconds,median,q25,q75"]
        for row in zip(self.lags_seconds, self.median, self.q25, self.q75):
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def acf(sequence, max_lag_frames: int) -> np.ndarray | None:
    """Pearson autocorrelation for lags 0..max_lag_frames, or None for a constant sequence."""
    x = np.asarray(sequence, dtype=np.float64)
    if x.ndim != 1 or x.size <= max_lag_frames:
        raise ValueError(f"sequence of length {x.size} too short for max lag {max_lag_frames}")
    if np.ptp(x) == 0:
        return None
    rho = K.acf_lags(x, int(max_lag_frames))
    rho[0] = 1.0
    return np.clip(rho, -1.0, 1.0)


def aggregate_acf(curves: Iterable[np.ndarray | None], fps: float) -> AcfCurve:
    """Pointwise median and interquartile band of several ACF curves.

    ``None`` entries (constant sequences) are skipped.  The half-life is the
    first lag whose median falls below 0.5, in seconds.
    """
    curves = list(curves)
    kept = [np.asarray(c) for c in curves if c is not None]
    if not kept:
        raise ValueError("no ACF curves to aggregate")
    n = min(c.size for c in kept)
    stack = np.vstack([c[:n] for c in kept])
    # a lag whose window was constant shows up as nan
    q25, median, q75 = np.nanpercentile(stack, [25, 50, 75], axis=0)
    below = np.flatnonzero(median < 0.5)
    half_life = float(below[0] / fps) if below.size else None
    return AcfCurve(np.arange(n) / fps, median, q25, q75, half_life, len(kept), len(curves) - len(kept))


def half_life_frames(phi: float) -> float:
    return math.log(0.5) / math.log(phi)


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def arm_means(y, arms: Sequence[Arm]) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    starts = np.array([a.start for a in arms])
    sizes = np.array([a.size for a in arms])
    return np.add.reduceat(y[: arms[-1].end + 1], starts) / sizes


def oracle_arm_set(y, arms: Sequence[Arm], m: int) -> set[int]:
    """Arms with the m largest true mean utilities (lowest id on ties)."""
    return top_m(arm_means(y, arms), m)


def _top_k_indices(values: np.ndarray, k: int) -> np.ndarray:
    return np.sort(np.argsort(-values, kind="stable")[:k])


def oracle_frames(y, k: int, arms: Sequence[Arm] | None = None, quota: dict[int, int] | None = None) -> set[int]:
    """Frames of maximal total utility.

    Without ``quota`` this is the global top-k.  With ``quota`` (arm id ->
    count) it is the union of the top ``quota[a]`` frames inside each arm.
    """
    y = np.asarray(y, dtype=np.float64)
    if quota is None:
        return {int(i) for i in _top_k_indices(y, k)}
    if arms is None:
        raise ValueError("quota needs arms")
    out: set[int] = set()
    for a, ka in quota.items():
        arm = arms[a]
        local = _top_k_indices(y[arm.start : arm.end + 1], ka)
        out.update(int(i) + arm.start for i in local)
    return out


# ---------------------------------------------------------------------------
# policies
# ---------------------------------------------------------------------------

@dataclass
class TrialReport:
    policy: str
    trial: int
    seed: int
    captured_utility: float
    oracle_utility: float
    frame_regret: float
    arm_hit: bool | None
    arm_jaccard: float | None
    frames_seen_fraction: float
    pulls: int
    n_frames: int
    wall_time: float

    def to_dict(self) -> dict:
        return asdict(self)


def uniform_frames(total_frames: int, k: int) -> list[int]:
    """Centre-of-bin frames floor((i + 0.5) * T / k)."""
    k = min(k, total_frames)
    return [int(math.floor((i + 0.5) * total_frames / k)) for i in range(k)]


def prefilter_frames(total_frames: int, fps: float, rate: float = 1.0) -> np.ndarray:
    step = fps / rate
    n = int(math.ceil(total_frames / step))
    return np.unique(np.floor(np.arange(n) * step).astype(np.int64))


def _jaccard(a: set, b: set) -> float:
    return len(a & b) / len(a | b) if (a or b) else 1.0


def run_policy(
    policy: str,
    provider,
    cfg: SelectionConfig,
    utility=None,
    trial: int = 0,
    prefilter_fps: float = 1.0,
) -> TrialReport:
    """Run one keyframe policy on one video and score it against the true utility.

    ``utility`` defaults to ``provider.utility`` (synthetic providers).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    y = np.asarray(provider.utility if utility is None else utility, dtype=np.float64)
    meta = VideoMeta(provider.total_frames, provider.fps)
    T, k = meta.total_frames, min(cfg.k, meta.total_frames)
    arms = partition_timeline(meta, cfg.clip_seconds)
    ledger = BudgetLedger()
    chosen_arms = None
    t0 = time.perf_counter()

    if policy == "uniform":
        frames = uniform_frames(T, k)
    elif policy in ("topk-full", "topk-prefilter"):
        cand = np.arange(T) if policy == "topk-full" else prefilter_frames(T, meta.fps, prefilter_fps)
        scores = provider.score_many(cand)
        ledger.record_many(np.zeros_like(cand), cand)
        frames = sorted(int(f) for f in cand[_top_k_indices(scores, min(k, cand.size))])
    elif policy in ("two-stage", "iterative"):
        sel, trace = select_keyframes(provider, cfg, policy)
        frames = sel.frames
        if trace is not None:
            ledger, chosen_arms = trace.ledger, set(sel.selected_arms)
    elif policy in ("mean-coarse", "coarse-only"):
        if policy == "mean-coarse":
            chosen_arms, trace = two_stage_select(provider, arms, cfg, optimistic=False)
            within = "weighted"
        else:
            chosen_arms, trace = coarse_only_select(provider, arms, cfg)
            within = "uniform"
        frames = assemble(chosen_arms, arms, trace.stats, k, seed=cfg.seed, within=within).frames
        ledger = trace.ledger
    else:  # random-probe
        budget = min(T, total_pulls_two_stage(len(arms), cfg))
        rng = np.random.default_rng([cfg.seed, 0xF0F])
        probe = np.sort(rng.choice(T, size=budget, replace=False))
        scores = provider.score_many(probe)
        ledger.record_many(np.zeros_like(probe), probe)
        whole = Arm(0, 0, T - 1)
        dense = interpolate_rewards(whole, list(zip(probe.tolist(), scores.tolist())))
        frames = sample_frames(whole, dense, k, np.random.default_rng([cfg.seed, 0xF0E])).tolist()

    wall = time.perf_counter() - t0
    captured = float(y[np.asarray(frames, dtype=np.int64)].sum()) if len(frames) else 0.0
    oracle = float(y[sorted(oracle_frames(y, k))].sum())
    hit = jac = None
    if chosen_arms is not None:
        truth = oracle_arm_set(y, arms, len(chosen_arms))
        hit = set(chosen_arms) == truth
        jac = _jaccard(set(chosen_arms), truth)
    return TrialReport(
        policy=policy,
        trial=trial,
        seed=cfg.seed,
        captured_utility=captured,
        oracle_utility=oracle,
        frame_regret=oracle - captured,
        arm_hit=hit,
        arm_jaccard=jac,
        frames_seen_fraction=frames_seen_fraction(ledger, meta),
        pulls=ledger.pulls_total,
        n_frames=len(frames),
        wall_time=wall,
    )


# ---------------------------------------------------------------------------
# synthetic instance families
# ---------------------------------------------------------------------------

def planted_instance(
    seed: int,
    minutes: float = 30.0,
    fps: float = 30.0,
    half_life_seconds: float = 5.0,
    max_cover: float = 0.09,
    noise_std: float = 0.1,
) -> SyntheticSpec:
    """Long video with one to four hot segments covering under 10% of it.

    Segments last 8-60 s at peak utility 0.7-1.0 over a 0.15 base with a
    mild AR(1) texture; the smoothing half-life sets the ACF decay.
    """
    rng = np.random.default_rng([seed, 0x91A])
    T = int(round(minutes * 60 * fps))
    n_seg = int(rng.integers(1, 5))
    budget = max_cover * T
    lengths = rng.uniform(8, 60, size=n_seg) * fps
    if lengths.sum() > budget:
        lengths *= budget / lengths.sum()
    lengths = np.maximum(lengths.astype(np.int64), 1)
    # place segments left to right with random gaps
    slack = T - int(lengths.sum())
    cuts = np.sort(rng.integers(0, slack, size=n_seg))
    segs, offset = [], 0
    for L, c in zip(lengths, cuts):
        start = int(c) + offset
        segs.append((start, start + int(L), float(rng.uniform(0.7, 1.0))))
        offset += int(L)
    return SyntheticSpec(
        total_frames=T,
        fps=fps,
        segments=tuple(segs),
        half_life_seconds=half_life_seconds,
        noise_std=noise_std,
        base_level=0.15,
        fluctuation_std=0.05,
        seed=int(seed),
    )


def between_samples_instance(
    seed: int,
    minutes: float = 30.0,
    fps: float = 30.0,
    n_spikes: int = 24,
    spike_frames: int = 20,
    noise_std: float = 0.05,
) -> SyntheticSpec:
    """Short hot spikes that all fall strictly between 1-fps sampling instants.

    Each spike occupies ``spike_frames`` (< fps) consecutive frames inside
    one gap between frames ``floor(j * fps)``, so a 1 fps pre-filter never
    scores a spike frame.  No smoothing, so the spikes stay narrow.
    """
    rng = np.random.default_rng([seed, 0xADD])
    T = int(round(minutes * 60 * fps))
    step = int(round(fps))
    if spike_frames >= step:
        raise ValueError("spikes must be shorter than one second")
    seconds = np.sort(rng.choice(T // step - 1, size=n_spikes, replace=False))
    segs = []
    for s in seconds:
        lo = int(s) * step + 1
        start = lo + int(rng.integers(0, step - 1 - spike_frames + 1))
        segs.append((start, start + spike_frames, float(rng.uniform(0.8, 1.0))))
    return SyntheticSpec(
        total_frames=T,
        fps=fps,
        segments=tuple(segs),
        half_life_seconds=0.0,
        noise_std=noise_std,
        base_level=0.1,
        fluctuation_std=0.03,
        seed=int(seed),
    )


def arm_means_provider(means: Sequence[float], arm_frames: int, noise_std: float, seed: int, fps: float = 1.0):
    """Provider whose consecutive blocks of ``arm_frames`` frames have constant utility."""
    y = np.repeat(np.asarray(means, dtype=np.float64), arm_frames)
    return SyntheticProvider(y, fps=fps, noise_std=noise_std, seed=seed)


# ---------------------------------------------------------------------------
# batch evaluation
# ---------------------------------------------------------------------------

def evaluate(
    policies: Sequence[str],
    make_spec: Callable[[int], SyntheticSpec],
    cfg: SelectionConfig,
    trials: int,
    master_seed: int = 0,
    workers: int = 1,
) -> list[TrialReport]:
    """Run every policy on ``trials`` instances; trial i uses seed derived from (master_seed, i).

    All policies of one trial see the same instance and the same noise
    stream (each gets a fresh provider).
    """
    for p in policies:
        if p not in POLICIES:
            raise ValueError(f"unknown policy {p!r}")
    jobs = [(tuple(policies), make_spec, cfg, i, master_seed) for i in range(trials)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as ex:
            chunks = list(ex.map(_trial_job, jobs))
    else:
        chunks = [_trial_job(j) for j in jobs]
    reports = [r for c in chunks for r in c]
    reports.sort(key=lambda r: (r.trial, policies.index(r.policy)))
    return reports


def trial_seed(master_seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([master_seed, trial]).generate_state(1)[0])


def _trial_job(job) -> list[TrialReport]:
    policies, make_spec, cfg, i, master_seed = job
    seed = trial_seed(master_seed, i)
    spec = make_spec(seed)
    y, _ = generate_process(spec)
    tcfg = SelectionConfig(**{**cfg.to_dict(), "seed": seed})
    out = []
    for p in policies:
        provider = SyntheticProvider(y, fps=spec.fps, noise_std=spec.noise_std, seed=spec.seed)
        out.append(run_policy(p, provider, tcfg, utility=y, trial=i))
    return out


def summarize(reports: Iterable[TrialReport]) -> list[dict]:
    """Per-policy means with normal-approximation 95% confidence intervals."""
    by: dict[str, list[TrialReport]] = {}
    for r in reports:
        by.setdefault(r.policy, []).append(r)
    rows = []
    for policy in sorted(by):
        rs = by[policy]
        row = {"policy": policy, "n": len(rs)}
        for key in ("captured_utility", "frame_regret", "frames_seen_fraction", "pulls"):
            v = np.array([getattr(r, key) for r in rs], dtype=np.float64)
            half = 1.96 * v.std(ddof=1) / math.sqrt(v.size) if v.size > 1 else 0.0
            row[f"{key}_mean"] = float(v.mean())
            row[f"{key}_ci_low"] = float(v.mean() - half)
            row[f"{key}_ci_high"] = float(v.mean() + half)
        rows.append(row)
    return rows


def sign_test(a: Sequence[float], b: Sequence[float]) -> float:
    """One-sided paired sign test p-value for "a tends to exceed b" (ties dropped)."""
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    wins = int(np.count_nonzero(d > 0))
    losses = int(np.count_nonzero(d < 0))
    if wins + losses == 0:
        return 1.0
    return float(sps.binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue)


# ---------------------------------------------------------------------------
# identification rate
# ---------------------------------------------------------------------------

@dataclass
class IdentificationResult:
    rate: float
    bound: float
    trials: int
    n_arms: int
    n_final: np.ndarray = field(repr=False)
    hits: np.ndarray = field(repr=False)
    terminated_by: list[str] = field(repr=False, default_factory=list)

    @property
    def bounds_per_trial(self) -> np.ndarray:
        return 1.0 - 6.0 * self.n_arms / self.n_final


def identification_rate(
    make_instance: Callable[[int], tuple[object, Sequence[Arm], np.ndarray]],
    cfg: SelectionConfig,
    trials: int,
    master_seed: int = 0,
    algorithm: str = "iterative",
) -> IdentificationResult:
    """Fraction of trials in which the selector returns exactly the true top-m arms.

    ``make_instance(seed)`` returns ``(provider, arms, utility)``.  The
    reported ``bound`` is ``1 - 6M / n`` at the largest final pull count
    seen, the most demanding of the per-trial guarantees; it can be
    negative (vacuous).
    """
    select = iterative_select if algorithm == "iterative" else two_stage_select
    hits, n_final, ends = [], [], []
    M = None
    for i in range(trials):
        seed = trial_seed(master_seed, i)
        provider, arms, y = make_instance(seed)
        M = len(arms)
        tcfg = SelectionConfig(**{**cfg.to_dict(), "seed": seed})
        chosen, trace = select(provider, arms, tcfg)
        truth = oracle_arm_set(y, arms, len(chosen))
        hits.append(chosen == truth)
        n_final.append(trace.pulls)
        ends.append(trace.terminated_by)
    n_final = np.array(n_final)
    bound = 1.0 - 6.0 * M / n_final.max()
    return IdentificationResult(float(np.mean(hits)), float(bound), trials, M, n_final, np.array(hits), ends)
