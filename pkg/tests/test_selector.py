import numpy as np
import pytest
from hypothesis import given, strategies as st

from clipbandit.harness import arm_means_provider, oracle_arm_set
from clipbandit.providers import SyntheticProvider
from clipbandit.selector import (
    ConfigError,
    FramePicker,
    SelectionConfig,
    check_separation,
    coarse_only_select,
    iterative_select,
    total_pulls_two_stage,
    two_stage_select,
)
from clipbandit.stats import ArmStats, StatsTable, bernstein_radius, top_m
from clipbandit.timeline import Arm, VideoMeta, partition_timeline


def _arms(n, size):
    return partition_timeline(VideoMeta(n * size, 1.0), float(size))


def test_config_defaults_and_validation():
    cfg = SelectionConfig()
    assert (cfg.k, cfg.clip_seconds, cfg.alpha, cfg.q, cfg.z) == (64, 16.0, 0.25, 4, 15)
    for bad in [dict(alpha=0), dict(alpha=1.5), dict(q=0), dict(z=0), dict(k=0), dict(m=0),
                dict(clip_seconds=-1), dict(seed=-1), dict(pulls_per_iteration=0), dict(q=2.5)]:
        with pytest.raises(ConfigError):
            SelectionConfig(**bad)


def test_coarse_size_ceiling():
    cfg = SelectionConfig(alpha=0.1)
    assert cfg.coarse_size(225) == 23
    assert cfg.coarse_size(230) == 23  # 0.1 * 230 is 23.000000000000004 in floating point
    assert SelectionConfig(alpha=0.25).coarse_size(225) == 57
    assert SelectionConfig(alpha=0.5).coarse_size(225) == 113


def test_default_m():
    assert SelectionConfig().resolve_m(225) == 16
    assert SelectionConfig(k=8).resolve_m(225) == 2
    # clamped so the coarse set can always hold the final set
    assert SelectionConfig().resolve_m(20) == 5


def test_config_rejects_m_above_coarse_or_M():
    with pytest.raises(ConfigError):
        SelectionConfig(m=10, alpha=0.25).check_for(20)
    with pytest.raises(ConfigError):
        SelectionConfig(m=30, alpha=1.0).check_for(20)


def test_total_pulls_one_hour():
    assert total_pulls_two_stage(225, SelectionConfig()) == 225 * 4 + 57 * 15 == 1755


def test_iterative_deterministic_constant_rewards():
    prov = arm_means_provider([0.9, 0.5, 0.1], 50, 0.0, seed=0)
    # separating needs 178 refinement steps, above the default cap of 50 * M = 150
    chosen, trace = iterative_select(prov, _arms(3, 50), SelectionConfig(m=1, q=2, alpha=1.0, max_iterations=1000))
    assert chosen == {0}
    assert trace.terminated_by == "separation"
    assert trace.iterations == 178
    _, capped = iterative_select(prov, _arms(3, 50), SelectionConfig(m=1, q=2, alpha=1.0))
    assert capped.terminated_by == "iteration_cap"


def test_iterative_brute_force_replay():
    # independent re-simulation of the loop: radii of zero-variance arms are
    # 3 ln n / N, pull the widest arm in the symmetric difference
    means = [0.9, 0.5, 0.1]
    prov = arm_means_provider(means, 50, 0.0, seed=0)
    _, trace = iterative_select(prov, _arms(3, 50), SelectionConfig(m=1, q=2, alpha=1.0, max_iterations=1000))
    counts = [2, 2, 2]
    pulled = []
    while True:
        n = sum(counts)
        beta = [3 * np.log(n) / c for c in counts]
        top = top_m(means, 1)
        tilde = [means[a] - beta[a] if a in top else means[a] + beta[a] for a in range(3)]
        diff = top ^ top_m(tilde, 1)
        if not diff:
            break
        p = max(sorted(diff), key=lambda a: beta[a])
        counts[p] += 1
        pulled.append(p)
    assert [r.arm for r in trace.rounds[6:]] == pulled


def test_iterative_all_arms_immediately():
    prov = arm_means_provider([0.2, 0.4, 0.6, 0.8], 10, 0.1, seed=0)
    chosen, trace = iterative_select(prov, _arms(4, 10), SelectionConfig(m=4, q=3, alpha=1.0))
    assert chosen == {0, 1, 2, 3}
    assert trace.pulls == 12 and trace.iterations == 0 and trace.terminated_by == "separation"


def test_iterative_zero_gap_hits_cap():
    prov = arm_means_provider([0.5, 0.5], 200, 0.1, seed=1)
    chosen, trace = iterative_select(prov, _arms(2, 200), SelectionConfig(m=1, q=2, alpha=1.0, max_iterations=50))
    assert len(chosen) == 1
    assert trace.terminated_by == "iteration_cap" and trace.iterations == 50
    assert trace.pulls == 4 + 50


def test_iterative_pulls_per_iteration():
    prov = arm_means_provider([0.5, 0.5], 200, 0.1, seed=1)
    _, trace = iterative_select(
        prov, _arms(2, 200), SelectionConfig(m=1, q=2, alpha=1.0, max_iterations=10, pulls_per_iteration=3)
    )
    assert trace.pulls == 4 + 30


def test_trace_rounds_strictly_increasing_and_replayable():
    prov = arm_means_provider([0.3, 0.6, 0.5, 0.2], 40, 0.2, seed=3)
    _, trace = iterative_select(prov, _arms(4, 40), SelectionConfig(m=2, q=2, alpha=1.0, seed=5))
    rounds = [r.round for r in trace.rounds]
    assert rounds == list(range(1, len(rounds) + 1))
    table = StatsTable(4)
    for r in trace.rounds:
        table.update(r.arm, r.frame, r.reward)
    np.testing.assert_array_equal(table.means, trace.stats.means)
    np.testing.assert_array_equal(table.counts, trace.stats.counts)


@pytest.mark.parametrize("select", [iterative_select, two_stage_select])
def test_determinism(select):
    def run():
        prov = arm_means_provider([0.3, 0.6, 0.5, 0.2, 0.7], 40, 0.2, seed=3)
        return select(prov, _arms(5, 40), SelectionConfig(m=2, q=2, z=5, alpha=0.6, seed=5))

    (a, ta), (b, tb) = run(), run()
    assert a == b and ta.rounds == tb.rounds


def test_two_stage_single_arm():
    prov = arm_means_provider([0.4], 30, 0.1, seed=0)
    chosen, trace = two_stage_select(prov, _arms(1, 30), SelectionConfig(m=1, q=4, z=15))
    assert chosen == {0} and trace.pulls == 19


def test_two_stage_exhaustive_equals_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        y = rng.random(200)
        arms = _arms(10, 20)
        prov = SyntheticProvider(y, fps=1.0)
        chosen, _ = two_stage_select(prov, arms, SelectionConfig(m=3, q=10, z=10, alpha=1.0))
        assert chosen == oracle_arm_set(y, arms, 3)


@given(st.integers(1, 30), st.integers(1, 6), st.integers(1, 6), st.sampled_from([0.1, 0.3, 0.5, 1.0]), st.integers(0, 99))
def test_two_stage_budget_exact(M, q, z, alpha, seed):
    arms = _arms(M, 8)
    prov = arm_means_provider(np.linspace(0.1, 0.9, M), 8, 0.1, seed=seed)
    cfg = SelectionConfig(m=1, q=q, z=z, alpha=alpha, seed=seed)
    chosen, trace = two_stage_select(prov, arms, cfg)
    assert trace.pulls == M * q + cfg.coarse_size(M) * z == total_pulls_two_stage(M, cfg)
    assert len(trace.coarse) == cfg.coarse_size(M)
    assert len(chosen) == 1 and chosen <= set(range(M))
    assert trace.terminated_by == "two_stage_complete"
    assert trace.ledger.is_consistent()


def test_mean_ranked_coarse_uses_same_budget():
    arms = _arms(12, 20)
    for seed in range(5):
        cfg = SelectionConfig(m=2, q=3, z=4, alpha=0.25, seed=seed)
        _, t1 = two_stage_select(arm_means_provider(np.linspace(0, 1, 12), 20, 0.2, seed), arms, cfg)
        _, t2 = two_stage_select(arm_means_provider(np.linspace(0, 1, 12), 20, 0.2, seed), arms, cfg, optimistic=False)
        assert t2.pulls <= t1.pulls


def test_coarse_only():
    arms = _arms(6, 10)
    chosen, trace = coarse_only_select(arm_means_provider([0.1, 0.9, 0.2, 0.8, 0.3, 0.7], 10, 0.0, 0), arms,
                                       SelectionConfig(m=3, q=2, alpha=0.5))
    assert chosen == {1, 3, 5} and trace.pulls == 12


def test_within_arm_pulls_without_replacement_then_with():
    arms = [Arm(0, 0, 4)]
    pick = FramePicker(arms, seed=1)
    first = pick.pick(0, 5)
    assert sorted(first) == [0, 1, 2, 3, 4]
    more = pick.pick(0, 7)
    assert len(more) == 7 and all(0 <= f <= 4 for f in more)


def test_within_arm_stream_independent_of_interleaving():
    arms = _arms(3, 30)
    a, b = FramePicker(arms, 7), FramePicker(arms, 7)
    seq_a = [int(a.pick(1)[0]) for _ in range(10)]
    seq_b = []
    for _ in range(10):
        b.pick(0)
        seq_b.append(int(b.pick(1)[0]))
        b.pick(2)
    assert seq_a == seq_b


def test_check_separation_examples():
    # zero-variance arms with N=10 at n=e^(10/3) ... choose n so radius is 0.1
    n = int(round(np.exp(10 * 0.1 / 3)))
    r = bernstein_radius(ArmStats(count=10, mean=0.0), n)
    inside = ArmStats(count=10, mean=0.8 + r)
    assert check_separation([inside, ArmStats(count=10, mean=0.6 - r)], {0}, n)
    assert not check_separation([inside, ArmStats(count=10, mean=0.8 + r - 2 * r)], {0}, n)
    assert check_separation([inside, ArmStats(count=10, mean=0.1)], {0, 1}, n)


def test_check_separation_boundary_exact():
    # identical bounds: radius 0 at n=1
    a, b = ArmStats(count=3, mean=0.5), ArmStats(count=3, mean=0.5)
    assert not check_separation([a, b], {0}, 1)
    assert check_separation([ArmStats(count=3, mean=0.51), b], {0}, 1)
    with pytest.raises(ValueError):
        check_separation([a, b], set(), 1)


def test_identification_improves_with_q():
    arms = _arms(6, 60)
    means = [0.5, 0.45, 0.4, 0.35, 0.3, 0.25]
    rates = []
    for q in (1, 4, 16):
        hits = 0
        for seed in range(150):
            prov = arm_means_provider(means, 60, 0.3, seed)
            chosen, _ = two_stage_select(prov, arms, SelectionConfig(m=2, q=q, z=1, alpha=1 / 3, seed=seed))
            hits += chosen == {0, 1}
        rates.append(hits / 150)
    # non-decreasing up to Monte Carlo slack
    assert rates[0] <= rates[1] + 0.05 and rates[1] <= rates[2] + 0.05
    assert rates[2] > rates[0]
