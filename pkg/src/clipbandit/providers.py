"""Reward sources for the selector.

A provider answers "what is the relevance score of frame t?".  Two kinds are
available: :class:`SyntheticProvider`, which draws noisy scores around a
hidden utility curve built by :func:`generate_process`, and
:class:`ScoreFileProvider`, which replays a CSV of precomputed scores.
"""
from __future__ import annotations

import csv
import json
import math
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.special import ndtr, ndtri

from ._kernels import K, hash_uniform_scalar

SCORE_HEADER = ("frame_index", "score")
_KEY_MASK = (1 << 64) - 1


@runtime_checkable
class RewardProvider(Protocol):
    total_frames: int
    fps: float

    def score(self, frame: int) -> float: ...

    def score_many(self, frames) -> np.ndarray: ...


# ---------------------------------------------------------------------------
# synthetic processes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic relevance process.

    ``segments`` are half-open frame ranges ``[start, end)`` lifted to a peak
    utility level over ``base_level``.  ``fluctuation_std`` adds a stationary
    AR(1) texture with the same half-life as the smoothing, which is what
    gives a segment-free process its exponential autocorrelation.
    """

    total_frames: int
    fps: float = 30.0
    segments: tuple[tuple[int, int, float], ...] = ()
    half_life_seconds: float = 0.0
    noise_std: float = 0.0
    base_level: float = 0.0
    fluctuation_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        segs = tuple(tuple(s) for s in self.segments)
        object.__setattr__(self, "segments", tuple((int(a), int(b), float(c)) for a, b, c in segs))
        if int(self.total_frames) != self.total_frames or self.total_frames < 1:
            raise ValueError(f"total_frames must be a positive integer, got {self.total_frames!r}")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps!r}")
        if self.half_life_seconds < 0:
            raise ValueError("half_life_seconds must be >= 0")
        if self.noise_std < 0 or self.fluctuation_std < 0:
            raise ValueError("noise_std and fluctuation_std must be >= 0")
        if not 0.0 <= self.base_level <= 1.0:
            raise ValueError(f"base_level {self.base_level} outside [0, 1]")
        ordered = sorted(self.segments)
        for start, end, level in ordered:
            if not 0 <= start < end <= self.total_frames:
                raise ValueError(f"segment [{start}, {end}) outside [0, {self.total_frames})")
            if not 0.0 <= level <= 1.0:
                raise ValueError(f"segment level {level} outside [0, 1]")
        for (s0, e0, _), (s1, _, _) in zip(ordered, ordered[1:]):
            if s1 < e0:
                raise ValueError(f"segments [{s0}, {e0}) and [{s1}, ...) overlap")

    @property
    def phi(self) -> float:
        """Per-frame AR(1) coefficient whose autocorrelation halves after the half-life."""
        if self.half_life_seconds == 0:
            return 0.0
        return 0.5 ** (1.0 / (self.half_life_seconds * self.fps))

    def with_seed(self, seed: int) -> "SyntheticSpec":
        d = asdict(self)
        d["seed"] = int(seed)
        return SyntheticSpec(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["segments"] = [list(s) for s in self.segments]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synthetic spec keys: {sorted(unknown)}")
        if "total_frames" not in d:
            raise ValueError("synthetic spec needs total_frames")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SyntheticSpec":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        if not isinstance(d, dict):
            raise ValueError("synthetic spec must be a JSON object")
        return cls.from_dict(d)


def utility_curve(spec: SyntheticSpec) -> np.ndarray:
    T = spec.total_frames
    step = np.full(T, spec.base_level, dtype=np.float64)
    for start, end, level in spec.segments:
        step[start:end] = level
    phi = spec.phi
    if phi > 0:
        y = K.ar1_filter(step, phi, 1.0 - phi, step[0])
    else:
        y = step
    if spec.fluctuation_std > 0:
        rng = np.random.default_rng([spec.seed, 1])
        init = rng.standard_normal()
        w = rng.standard_normal(T)
        tex = K.ar1_filter(w, phi, math.sqrt(1.0 - phi * phi), init) if phi > 0 else w
        y = y + spec.fluctuation_std * tex
    return np.clip(y, 0.0, 1.0)


class SyntheticProvider:
    """Noisy scores r_t = y_t + eps around a known utility vector.

    The noise is a zero-mean Gaussian with std ``noise_std`` truncated
    symmetrically to ``[-min(y, 1-y), min(y, 1-y)]``, so every score stays in
    [0, 1] and is an unbiased draw of ``y_t``.  Noise for the j-th query of
    frame t depends only on ``(seed, t, j)``.
    """

    def __init__(self, utility, fps: float = 30.0, noise_std: float = 0.0, seed: int = 0):
        self.utility = np.asarray(utility, dtype=np.float64)
        if self.utility.ndim != 1 or self.utility.size == 0:
            raise ValueError("utility must be a non-empty 1-d array")
        if self.utility.min() < 0 or self.utility.max() > 1:
            raise ValueError("utility outside [0, 1]")
        self.total_frames = int(self.utility.size)
        self.fps = float(fps)
        self.noise_std = float(noise_std)
        self.seed = int(seed)
        self._key = (int(seed) * 0x2545F4914F6CDD1D + 0x5851F42D4C957F2D) & _KEY_MASK
        self._queries = np.zeros(self.total_frames, dtype=np.int64)
        self._lock = threading.Lock()

    def ground_truth(self, frame: int) -> float:
        return float(self.utility[frame])

    @property
    def queries(self) -> int:
        return int(self._queries.sum())

    def _ordinals(self, frames: np.ndarray) -> np.ndarray:
        with self._lock:
            if frames.size == 1:
                f = frames[0]
                o = self._queries[f]
                self._queries[f] = o + 1
                return np.array([o])
            # a frame repeated within one batch gets consecutive ordinals
            order = np.argsort(frames, kind="stable")
            sf = frames[order]
            starts = np.r_[0, np.flatnonzero(sf[1:] != sf[:-1]) + 1]
            run = np.arange(sf.size) - np.repeat(starts, np.diff(np.r_[starts, sf.size]))
            ords = np.empty_like(frames)
            ords[order] = self._queries[sf] + run
            np.add.at(self._queries, frames, 1)
            return ords

    def score_many(self, frames) -> np.ndarray:
        frames = np.atleast_1d(np.asarray(frames, dtype=np.int64))
        if frames.size and (frames.min() < 0 or frames.max() >= self.total_frames):
            raise IndexError("frame index out of range")
        ords = self._ordinals(frames)
        y = self.utility[frames]
        if self.noise_std == 0.0:
            return y.copy()
        u = K.hash_uniform(self._key, frames, ords)
        # a subnormal noise_std overflows to inf, which ndtr maps to 0 correctly
        with np.errstate(over="ignore"):
            half_width = np.minimum(y, 1.0 - y) / self.noise_std
        lo = ndtr(-half_width)
        eps = self.noise_std * ndtri(lo + u * (1.0 - 2.0 * lo))
        r = np.clip(y + eps, 0.0, 1.0)
        assert np.all((r >= 0.0) & (r <= 1.0))
        return r

    def score(self, frame: int) -> float:
        # scalar fast path; same values as score_many
        frame = int(frame)
        if not 0 <= frame < self.total_frames:
            raise IndexError("frame index out of range")
        with self._lock:
            o = int(self._queries[frame])
            self._queries[frame] = o + 1
        y = float(self.utility[frame])
        if self.noise_std == 0.0:
            return y
        u = hash_uniform_scalar(self._key, frame, o)
        lo = float(ndtr(-min(y, 1.0 - y) / self.noise_std))
        r = y + self.noise_std * float(ndtri(lo + u * (1.0 - 2.0 * lo)))
        r = min(max(r, 0.0), 1.0)
        return r


def generate_process(spec: SyntheticSpec) -> tuple[np.ndarray, SyntheticProvider]:
    """Build the hidden utility curve for ``spec`` and a noisy score sampler over it."""
    y = utility_curve(spec)
    return y, SyntheticProvider(y, fps=spec.fps, noise_std=spec.noise_std, seed=spec.seed)


# ---------------------------------------------------------------------------
# score files
# ---------------------------------------------------------------------------

class ScoreFileError(ValueError):
    def __init__(self, path, line: int, message: str):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


@dataclass
class ScoreFileProvider:
    scores: np.ndarray
    fps: float = 30.0
    path: str | None = None
    total_frames: int = field(init=False)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.total_frames = int(self.scores.size)

    def score(self, frame: int) -> float:
        return float(self.scores[frame])

    def score_many(self, frames) -> np.ndarray:
        return self.scores[np.atleast_1d(np.asarray(frames, dtype=np.int64))]


def load_scores(path, fps: float = 30.0) -> ScoreFileProvider:
    """Read a ``frame_index,score`` CSV into a noiseless provider.

    Frame indices must run 0, 1, 2, ... without gaps and every score must lie
    in [0, 1]; anything else raises :class:`ScoreFileError` naming the line.
    """
    path = Path(path)
    scores = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SCORE_HEADER:
            raise ScoreFileError(path, 1, f"expected header {','.join(SCORE_HEADER)!r}, got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ScoreFileError(path, lineno, f"expected 2 fields, got {len(row)}")
            try:
                idx = int(row[0])
                val = float(row[1])
            except ValueError as exc:
                raise ScoreFileError(path, lineno, str(exc)) from None
            expected = len(scores)
            if idx != expected:
                kind = "missing frame" if idx > expected else "non-monotone frame index"
                raise ScoreFileError(path, lineno, f"{kind}: expected {expected}, got {idx}")
            if not (0.0 <= val <= 1.0):
                raise ScoreFileError(path, lineno, f"score {row[1]!r} outside [0, 1]")
            scores.append(val)
    if not scores:
        raise ScoreFileError(path, 2, "no score rows")
    return ScoreFileProvider(np.array(scores), fps=fps, path=str(path))


def write_scores(path, values, header=SCORE_HEADER) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        fh.writelines(f"{i},{float(v)!r}\n" for i, v in enumerate(values))
