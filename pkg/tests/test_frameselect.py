import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from clipbandit.frameselect import (
    UnobservedArmWarning,
    allocate_quota,
    assemble,
    interpolate_rewards,
    sample_frames,
)
from clipbandit.timeline import Arm


def test_quota_even_split():
    q = allocate_quota(range(16), 64)
    assert set(q.values()) == {4}


def test_quota_largest_remainder_ties_to_lower_id():
    assert allocate_quota([5, 2, 9], 10) == {2: 4, 5: 3, 9: 3}


def test_quota_remainder_by_mean():
    assert allocate_quota([0, 1, 2], 10, means={0: 0.1, 1: 0.9, 2: 0.5}) == {0: 3, 1: 4, 2: 3}


def test_quota_cap_and_redistribute():
    assert allocate_quota([0, 1], 5, sizes={0: 2, 1: 100}) == {0: 2, 1: 3}


def test_quota_fewer_frames_than_arms():
    q = allocate_quota([0, 1, 2, 3], 2, means={0: 0.1, 1: 0.9, 2: 0.5, 3: 0.2})
    assert q == {0: 0, 1: 1, 2: 1, 3: 0}


@given(
    st.dictionaries(st.integers(0, 50), st.integers(1, 30), min_size=1, max_size=12),
    st.integers(0, 400),
    st.booleans(),
)
def test_quota_properties(sizes, k, with_means):
    means = {a: (a * 37 % 11) / 10 for a in sizes} if with_means else None
    q = allocate_quota(sizes, k, sizes=sizes, means=means)
    assert sum(q.values()) == min(k, sum(sizes.values()))
    assert all(0 <= q[a] <= sizes[a] for a in sizes)
    # arms below their cap differ by at most one
    uncapped = [q[a] for a in sizes if q[a] < sizes[a]]
    if uncapped:
        assert max(uncapped) - min(uncapped) <= 1
        # an arm left below the uncapped level must be full
        assert all(q[a] >= min(uncapped) or q[a] == sizes[a] for a in sizes)
    if k <= sum(sizes.values()) and all(s >= k for s in sizes.values()):
        assert max(q.values()) - min(q.values()) <= 1


def test_interpolation_nearest():
    arm = Arm(0, 0, 9)
    out = interpolate_rewards(arm, [(2, 0.8), (7, 0.2)])
    np.testing.assert_array_equal(out, [0.8] * 5 + [0.2] * 5)


def test_interpolation_tie_goes_earlier():
    out = interpolate_rewards(Arm(0, 0, 8), [(2, 0.8), (6, 0.2)])
    assert out[4] == 0.8 and out[5] == 0.2


def test_interpolation_single_observation_constant():
    out = interpolate_rewards(Arm(1, 10, 19), [(13, 0.3)])
    np.testing.assert_array_equal(out, np.full(10, 0.3))


def test_interpolation_duplicates_averaged_and_outside_ignored():
    out = interpolate_rewards(Arm(1, 10, 14), [(12, 0.2), (12, 0.6), (99, 1.0)])
    np.testing.assert_allclose(out, 0.4)


def test_interpolation_unobserved_warns_uniform():
    with pytest.warns(UnobservedArmWarning):
        out = interpolate_rewards(Arm(0, 0, 3), [])
    np.testing.assert_array_equal(out, [0.25] * 4)


@given(st.integers(1, 60), st.data())
def test_interpolation_against_brute_force(size, data):
    arm = Arm(0, 100, 100 + size - 1)
    frames = data.draw(st.lists(st.integers(100, 100 + size - 1), min_size=1, max_size=10))
    obs = [(f, data.draw(st.floats(0, 1))) for f in frames]
    out = interpolate_rewards(arm, obs)
    by_frame = {}
    for f, r in obs:
        by_frame.setdefault(f, []).append(r)
    mean = {f: sum(v) / len(v) for f, v in by_frame.items()}
    for t in arm.frames():
        nearest = min(mean, key=lambda f: (abs(f - t), f))
        assert out[t - arm.start] == pytest.approx(mean[nearest], abs=1e-15)


def test_sample_whole_arm():
    arm = Arm(0, 5, 9)
    got = sample_frames(arm, np.ones(5), 5, np.random.default_rng(0))
    np.testing.assert_array_equal(got, [5, 6, 7, 8, 9])


def test_sample_point_mass():
    arm = Arm(0, 0, 3)
    for s in range(50):
        assert sample_frames(arm, [1, 0, 0, 0], 1, np.random.default_rng(s)).tolist() == [0]


def test_sample_zero_weights_only_after_positives():
    arm = Arm(0, 0, 5)
    got = sample_frames(arm, [0, 0.5, 0, 0.2, 0, 0], 3, np.random.default_rng(1))
    assert {1, 3} <= set(got.tolist()) and len(got) == 3


def test_sample_all_zero_uniform_fallback():
    arm = Arm(0, 0, 3)
    counts = np.zeros(4)
    for s in range(4000):
        counts[sample_frames(arm, np.zeros(4), 1, np.random.default_rng(s))[0]] += 1
    assert sps.chisquare(counts).pvalue > 0.01


def test_sample_marginal_two_frames():
    arm = Arm(0, 0, 1)
    rng = np.random.default_rng(12345)
    hits = sum(sample_frames(arm, [0.75, 0.25], 1, rng)[0] == 0 for _ in range(100_000))
    assert abs(hits / 100_000 - 0.75) < 0.01


def test_sample_marginal_chi_square():
    w = np.array([0.1, 0.4, 0.2, 0.05, 0.25])
    arm = Arm(0, 0, 4)
    rng = np.random.default_rng(7)
    counts = np.zeros(5)
    for _ in range(100_000):
        counts[sample_frames(arm, w, 1, rng)[0]] += 1
    assert sps.chisquare(counts, w / w.sum() * counts.sum()).pvalue > 0.01


def test_sample_validation():
    arm = Arm(0, 0, 2)
    with pytest.raises(ValueError):
        sample_frames(arm, [1, 1], 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_frames(arm, [1, 1, 1], 4, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_frames(arm, [1, -1, 1], 1, np.random.default_rng(0))


def test_assemble_one_arm_full():
    arms = [Arm(0, 0, 9), Arm(1, 10, 19)]
    sel = assemble([1], arms, {1: [(12, 0.5)]}, 10)
    assert sel.frames == list(range(10, 20))


def test_assemble_argmax_frames():
    arms = [Arm(i, 10 * i, 10 * i + 9) for i in range(4)]
    obs = {}
    for a in arms:
        peak = a.start + 3 + a.id
        obs[a.id] = [(f, 1.0 if f == peak else 0.0) for f in a.frames()]
    sel = assemble(range(4), arms, obs, 4)
    assert sel.frames == [3, 14, 25, 36]


@given(st.integers(1, 8), st.integers(1, 100), st.integers(0, 10**6))
def test_assemble_invariants(n_sel, k, seed):
    arms = [Arm(i, 7 * i, 7 * i + 6) for i in range(10)]
    rng = np.random.default_rng(seed)
    selected = sorted(rng.choice(10, n_sel, replace=False).tolist())
    obs = {a: [(int(f), float(rng.random())) for f in rng.integers(arms[a].start, arms[a].end + 1, 2)] for a in selected}
    sel = assemble(selected, arms, obs, k, seed=seed)
    assert len(sel.frames) == min(k, 7 * n_sel)
    assert sel.frames == sorted(set(sel.frames))
    assert all(any(f in arms[a] for a in selected) for f in sel.frames)
    assert sum(sel.per_arm_quota.values()) == len(sel.frames)


def test_assemble_warns_on_unobserved_arm():
    arms = [Arm(0, 0, 9), Arm(1, 10, 19)]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sel = assemble([0, 1], arms, {0: [(3, 0.5)]}, 4)
    assert sel.unobserved_arms == [1] and sel.warnings
