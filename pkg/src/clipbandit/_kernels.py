"""Hot numeric kernels.

Every kernel has two implementations with identical signatures: a numba
``@njit`` version and a pure-numpy version.  The numba path is used when
numba imports and the environment variable ``CLIPBANDIT_DISABLE_NUMBA`` is
unset (or ``0``).  Both paths are always importable as ``NUMPY_KERNELS`` and
``NUMBA_KERNELS`` (the latter is ``None`` without numba) so tests and the
benchmark can compare them directly.
"""
from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np
from scipy.signal import lfilter

_DISABLED = os.environ.get("CLIPBANDIT_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")

try:
    import numba
    from numba import njit
except ImportError:  # pragma: no cover - numba is optional
    numba = None

HAS_NUMBA = numba is not None

# splitmix64 constants
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_K_FRAME = np.uint64(0xD6E8FEB86659FD93)
_K_ORD = np.uint64(0xA0761D6478BD642F)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _np_mix(x):
    x = x ^ (x >> np.uint64(30))
    x = x * _MIX1
    x = x ^ (x >> np.uint64(27))
    x = x * _MIX2
    return x ^ (x >> np.uint64(31))


def np_hash_uniform(key, frames, ordinals):
    """Counter-based uniforms in (0, 1) keyed on (key, frame, ordinal)."""
    f = np.asarray(frames, dtype=np.int64).astype(np.uint64)
    o = np.asarray(ordinals, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        x = np.uint64(key) + _GOLDEN
        x = _np_mix(np.full(f.shape, x, dtype=np.uint64) ^ (f * _K_FRAME))
        x = _np_mix((x + _GOLDEN) ^ (o * _K_ORD))
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53


_M64 = (1 << 64) - 1


def _py_mix(x: int) -> int:
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _M64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def hash_uniform_scalar(key: int, frame: int, ordinal: int) -> float:
    """Scalar twin of ``hash_uniform``, bit-identical to the array versions."""
    x = (int(key) + 0x9E3779B97F4A7C15) & _M64
    x = _py_mix(x ^ ((frame * 0xD6E8FEB86659FD93) & _M64))
    x = _py_mix(((x + 0x9E3779B97F4A7C15) & _M64) ^ ((ordinal * 0xA0761D6478BD642F) & _M64))
    return ((x >> 11) + 0.5) * _INV53


def np_ar1_filter(x, phi, gain, init):
    """y[t] = phi * y[t-1] + gain * x[t] with y[-1] = init."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    y, _ = lfilter([gain], [1.0, -phi], x, zi=np.array([phi * init]))
    return y


def np_acf_lags(x, max_lag):
    """Pearson correlation of (x[t], x[t+d]) over the overlapping window, d = 0..max_lag."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    out = np.empty(max_lag + 1)
    for d in range(max_lag + 1):
        a = x[: n - d]
        b = x[d:]
        da = a - a.mean()
        db = b - b.mean()
        den = math.sqrt(float(da @ da) * float(db @ db))
        out[d] = float(da @ db) / den if den > 0.0 else np.nan
    return out


def np_nearest_fill(length, positions, values):
    """Nearest-neighbour fill over 0..length-1; equidistant ties go to the earlier position.

    ``positions`` must be sorted ascending and unique.
    """
    positions = np.asarray(positions, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    t = np.arange(length, dtype=np.int64)
    right = np.searchsorted(positions, t, side="left")
    right_c = np.minimum(right, positions.size - 1)
    left_c = np.maximum(right - 1, 0)
    d_right = np.abs(positions[right_c] - t)
    d_left = np.abs(t - positions[left_c])
    take_left = d_left <= d_right
    idx = np.where(take_left, left_c, right_c)
    return values[idx]


def _np_top_mask(values, m):
    order = np.argsort(-values, kind="stable")
    mask = np.zeros(values.size, dtype=np.bool_)
    mask[order[:m]] = True
    return mask


def np_radii(counts, variances, n_total):
    """Variance-adaptive confidence radii for all arms at total pull count n_total."""
    ln_n = math.log(n_total) if n_total > 1 else 0.0
    denom = np.maximum(1.0, np.asarray(counts, dtype=np.float64))
    var = np.where(np.asarray(counts) > 0, variances, 0.0)
    return np.sqrt(2.0 * var * ln_n / denom) + 3.0 * ln_n / denom


def np_optimistic_step(counts, means, m2, n_total, m):
    """One decision of the iterative selector.

    ``m2`` holds each arm's sum of squared deviations.  Returns
    ``(stop, arm_to_pull, top_mask)``; ``arm_to_pull`` is -1 when stopping.
    """
    counts = np.asarray(counts)
    variances = np.where(counts > 1, np.maximum(m2, 0.0) / np.maximum(counts, 1), 0.0)
    beta = np_radii(counts, variances, n_total)
    top = _np_top_mask(means, m)
    perturbed = np.where(top, means - beta, means + beta)
    top_tilde = _np_top_mask(perturbed, m)
    diff = top ^ top_tilde
    if not diff.any():
        return True, -1, top
    cand = np.where(diff, beta, -np.inf)
    return False, int(np.argmax(cand)), top


NUMPY_KERNELS = SimpleNamespace(
    name="numpy",
    hash_uniform=np_hash_uniform,
    ar1_filter=np_ar1_filter,
    acf_lags=np_acf_lags,
    nearest_fill=np_nearest_fill,
    radii=np_radii,
    optimistic_step=np_optimistic_step,
)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

def _build_numba():
    golden = np.uint64(0x9E3779B97F4A7C15)
    mix1 = np.uint64(0xBF58476D1CE4E5B9)
    mix2 = np.uint64(0x94D049BB133111EB)
    k_frame = np.uint64(0xD6E8FEB86659FD93)
    k_ord = np.uint64(0xA0761D6478BD642F)
    s30 = np.uint64(30)
    s27 = np.uint64(27)
    s31 = np.uint64(31)
    s11 = np.uint64(11)

    @njit(cache=True)
    def _mix(x):
        x = x ^ (x >> s30)
        x = x * mix1
        x = x ^ (x >> s27)
        x = x * mix2
        return x ^ (x >> s31)

    @njit(cache=True)
    def _hash_uniform(key, frames, ordinals):
        out = np.empty(frames.size, dtype=np.float64)
        k = np.uint64(key) + golden
        for i in range(frames.size):
            x = _mix(k ^ (np.uint64(frames[i]) * k_frame))
            x = _mix((x + golden) ^ (np.uint64(ordinals[i]) * k_ord))
            out[i] = (np.float64(x >> s11) + 0.5) * _INV53
        return out

    def hash_uniform(key, frames, ordinals):
        f = np.ascontiguousarray(frames, dtype=np.int64).ravel()
        o = np.ascontiguousarray(ordinals, dtype=np.int64).ravel()
        return _hash_uniform(np.uint64(key), f, o).reshape(np.shape(frames))

    @njit(cache=True)
    def _ar1_filter(x, phi, gain, init):
        y = np.empty_like(x)
        prev = init
        for t in range(x.size):
            prev = phi * prev + gain * x[t]
            y[t] = prev
        return y

    def ar1_filter(x, phi, gain, init):
        return _ar1_filter(np.ascontiguousarray(x, dtype=np.float64), float(phi), float(gain), float(init))

    @njit(cache=True)
    def _acf_lags(x, max_lag):
        n = x.size
        out = np.empty(max_lag + 1)
        for d in range(max_lag + 1):
            w = n - d
            sa = 0.0
            sb = 0.0
            for t in range(w):
                sa += x[t]
                sb += x[t + d]
            ma = sa / w
            mb = sb / w
            sab = 0.0
            saa = 0.0
            sbb = 0.0
            for t in range(w):
                a = x[t] - ma
                b = x[t + d] - mb
                sab += a * b
                saa += a * a
                sbb += b * b
            den = math.sqrt(saa * sbb)
            out[d] = sab / den if den > 0.0 else np.nan
        return out

    def acf_lags(x, max_lag):
        return _acf_lags(np.ascontiguousarray(x, dtype=np.float64), int(max_lag))

    @njit(cache=True)
    def _nearest_fill(length, positions, values):
        out = np.empty(length, dtype=np.float64)
        j = 0
        last = positions.size - 1
        for t in range(length):
            while j < last and positions[j + 1] <= t:
                j += 1
            # positions[j] is the last position <= t, or the first one if none
            if positions[j] >= t or j == last:
                out[t] = values[j]
            elif t - positions[j] <= positions[j + 1] - t:
                out[t] = values[j]
            else:
                out[t] = values[j + 1]
        return out

    def nearest_fill(length, positions, values):
        return _nearest_fill(
            int(length),
            np.ascontiguousarray(positions, dtype=np.int64),
            np.ascontiguousarray(values, dtype=np.float64),
        )

    @njit(cache=True)
    def _radii(counts, variances, n_total):
        ln_n = math.log(n_total) if n_total > 1 else 0.0
        out = np.empty(counts.size)
        for a in range(counts.size):
            d = max(1.0, float(counts[a]))
            v = variances[a] if counts[a] > 0 else 0.0
            out[a] = math.sqrt(2.0 * v * ln_n / d) + 3.0 * ln_n / d
        return out

    def radii(counts, variances, n_total):
        return _radii(
            np.ascontiguousarray(counts, dtype=np.int64),
            np.ascontiguousarray(variances, dtype=np.float64),
            int(n_total),
        )

    @njit(cache=True)
    def _top_mask(values, m):
        order = np.argsort(-values, kind="mergesort")
        mask = np.zeros(values.size, dtype=np.bool_)
        for i in range(m):
            mask[order[i]] = True
        return mask

    @njit(cache=True)
    def _optimistic_step(counts, means, m2, n_total, m):
        variances = np.zeros(counts.size)
        for a in range(counts.size):
            if counts[a] > 1:
                variances[a] = max(m2[a], 0.0) / counts[a]
        beta = _radii(counts, variances, n_total)
        top = _top_mask(means, m)
        perturbed = np.empty(means.size)
        for a in range(means.size):
            perturbed[a] = means[a] - beta[a] if top[a] else means[a] + beta[a]
        top_tilde = _top_mask(perturbed, m)
        best = -1
        best_beta = -np.inf
        for a in range(means.size):
            if top[a] != top_tilde[a] and beta[a] > best_beta:
                best = a
                best_beta = beta[a]
        return best == -1, best, top

    def optimistic_step(counts, means, m2, n_total, m):
        stop, arm, top = _optimistic_step(
            np.ascontiguousarray(counts, dtype=np.int64),
            np.ascontiguousarray(means, dtype=np.float64),
            np.ascontiguousarray(m2, dtype=np.float64),
            int(n_total),
            int(m),
        )
        return bool(stop), int(arm), top

    return SimpleNamespace(
        name="numba",
        hash_uniform=hash_uniform,
        ar1_filter=ar1_filter,
        acf_lags=acf_lags,
        nearest_fill=nearest_fill,
        radii=radii,
        optimistic_step=optimistic_step,
    )


NUMBA_KERNELS = _build_numba() if HAS_NUMBA else None

K = NUMBA_KERNELS if (NUMBA_KERNELS is not None and not _DISABLED) else NUMPY_KERNELS
BACKEND = K.name
