import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protoprune.exceptions import BudgetExceedsPool
from protoprune.sampler import (
    SchedulerConfig,
    SelectionState,
    budget_for,
    schedule,
    select_next_epoch,
    weighted_sample_without_replacement,
)


def successive_draw_marginals(weights, n, trials, rng):
    """Oracle: draw one id at a time proportional to the remaining weight."""
    counts = np.zeros(len(weights))
    for _ in range(trials):
        w = np.array(weights, dtype=float)
        for _ in range(n):
            i = rng.choice(len(w), p=w / w.sum())
            counts[i] += 1
            w[i] = 0.0
    return counts / trials


def sampler_marginals(weights, n, trials, rng):
    counts = np.zeros(len(weights))
    pool = np.arange(len(weights))
    for _ in range(trials):
        counts[weighted_sample_without_replacement(pool, weights, n, rng)] += 1
    return counts / trials


# ---------------------------------------------------------------- schedule


def test_schedule_examples():
    cfg = SchedulerConfig(0.7, 2.0, total_epochs=50)
    assert schedule(0, 100, cfg) == (70, 30)
    assert schedule(50, 100, cfg) == (0, 100)
    flat = SchedulerConfig(1.0, 0.0, total_epochs=50)
    assert all(schedule(t, 37, flat) == (37, 0) for t in range(50))
    with pytest.raises(ValueError):
        schedule(51, 100, cfg)


@given(st.integers(1, 400), st.integers(1, 1000), st.floats(0.01, 1.0), st.floats(0, 5))
def test_schedule_sums_to_budget_and_is_monotone(T, budget, varsigma, decay):
    cfg = SchedulerConfig(varsigma, decay, T)
    pairs = [schedule(t, budget, cfg) for t in range(T + 1)]
    assert all(a + b == budget and a >= 0 and b >= 0 for a, b in pairs)
    firsts = [a for a, _ in pairs]
    assert all(x >= y for x, y in zip(firsts, firsts[1:]))


def test_budget_rounds_half_up():
    assert budget_for(188, 0.5) == 94
    assert budget_for(5, 0.5) == 3
    assert budget_for(10, 1.0) == 10


# ----------------------------------------------------------------- sampler


def test_sampler_basic_contract(rng):
    pool = np.array([4, 9, 2, 7])
    assert weighted_sample_without_replacement(pool, np.array([1.0, 5, 2, 3]), 4, rng).tolist() == [2, 4, 7, 9]
    draw = weighted_sample_without_replacement(pool, np.ones(4), 2, rng)
    assert len(set(draw)) == 2 and set(draw) <= set(pool)
    with pytest.raises(BudgetExceedsPool):
        weighted_sample_without_replacement(pool, np.ones(4), 5, rng)
    with pytest.raises(ValueError):
        weighted_sample_without_replacement(pool, np.array([1.0, 0, 1, 1]), 2, rng)


def test_sampler_is_seeded():
    w = np.linspace(0.1, 2, 30)
    a = weighted_sample_without_replacement(np.arange(30), w, 10, np.random.default_rng(5))
    b = weighted_sample_without_replacement(np.arange(30), w, 10, np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_negligible_weight_is_almost_never_drawn():
    rng = np.random.default_rng(0)
    hits = sum(
        weighted_sample_without_replacement(np.array([0, 1]), np.array([1.0, 1e-12]), 1, rng)[0] == 0
        for _ in range(100_000)
    )
    assert hits / 100_000 == pytest.approx(1.0, abs=0.01)


def test_uniform_marginals():
    freq = sampler_marginals(np.ones(10), 5, 10_000, np.random.default_rng(1))
    np.testing.assert_allclose(freq, 0.5, atol=0.02)


@pytest.mark.parametrize("seed", range(4))
def test_marginals_match_successive_draw_oracle(seed):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(3, 11))
    weights = rng.uniform(0.05, 5.0, size)
    n = int(rng.integers(1, size))
    oracle = successive_draw_marginals(weights, n, 10_000, np.random.default_rng(100 + seed))
    ours = sampler_marginals(weights, n, 10_000, np.random.default_rng(200 + seed))
    np.testing.assert_allclose(ours, oracle, atol=0.02)


# --------------------------------------------------------------- selection


def test_two_sample_exhaustive_case(rng):
    state = SelectionState(np.array([0]), np.array([1]), np.ones(2))
    keep = select_next_epoch(state, [3.0], SchedulerConfig(1.0, 0.0, 10), rng)
    assert keep.retained.tolist() == [0]
    swap = select_next_epoch(state, [3.0], SchedulerConfig(1.0, 1.0, 1), rng)
    # at t=0 with varsigma=1 the retained share is the whole budget
    assert swap.retained.tolist() == [0]
    swap = select_next_epoch(
        SelectionState(np.array([0]), np.array([1]), np.ones(2), epoch=1), [3.0], SchedulerConfig(1.0, 1.0, 1), rng
    )
    assert swap.retained.tolist() == [1]


def test_no_pruning_keeps_everything(rng):
    state = SelectionState.initial(6, 6, rng)
    for _ in range(5):
        state = select_next_epoch(state, rng.uniform(0.1, 1, 6), SchedulerConfig(total_epochs=5), rng)
        assert state.retained.tolist() == list(range(6)) and len(state.pruned) == 0


def test_final_epoch_draws_only_from_pruned(rng):
    cfg = SchedulerConfig(total_epochs=10)
    state = SelectionState.initial(20, 8, rng)
    state.epoch = 10
    nxt = select_next_epoch(state, np.ones(8), cfg, rng)
    assert not set(nxt.retained) & set(state.retained)


def test_shortfall_transfers_to_other_pool(rng):
    # budget 7 of 10 leaves 3 pruned; early epochs ask for more than that
    cfg = SchedulerConfig(0.1, 0.0, total_epochs=20)
    state = SelectionState.initial(10, 7, rng)
    nxt = select_next_epoch(state, np.ones(7), cfg, rng)
    assert len(nxt.retained) == 7
    assert set(state.pruned) <= set(nxt.retained)


def test_weights_are_remembered_for_pruned_samples(rng):
    state = SelectionState.initial(10, 4, rng)
    w = np.arange(1.0, 5.0)
    nxt = select_next_epoch(state, w, SchedulerConfig(total_epochs=5), rng)
    np.testing.assert_array_equal(nxt.prev_weights[state.retained], w)
    np.testing.assert_array_equal(nxt.prev_weights[state.pruned], 1.0)
    assert nxt.epoch == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.floats(0.05, 1.0), st.integers(0, 2**31 - 1))
def test_partition_and_budget_invariants(n, ratio, seed):
    rng = np.random.default_rng(seed)
    budget = budget_for(n, ratio)
    if budget < 1:
        return
    cfg = SchedulerConfig(total_epochs=15)
    state = SelectionState.initial(n, budget, rng)
    for _ in range(20):
        state = select_next_epoch(state, rng.uniform(0.01, 3, budget), cfg, rng)
        assert len(state.retained) == budget
        assert not set(state.retained) & set(state.pruned)
        assert sorted(set(state.retained) | set(state.pruned)) == list(range(n))


def test_trajectory_is_reproducible():
    def trajectory(seed):
        rng = np.random.default_rng(seed)
        state = SelectionState.initial(30, 12, rng)
        out = []
        for _ in range(40):
            state = select_next_epoch(state, rng.uniform(0.1, 2, 12), SchedulerConfig(total_epochs=40), rng)
            out.append(state.retained.copy())
        return np.array(out)

    assert np.array_equal(trajectory(3), trajectory(3))


def test_no_sample_is_starved():
    rng = np.random.default_rng(11)
    cfg = SchedulerConfig(total_epochs=200)
    state = SelectionState.initial(20, 10, rng)
    seen = set(state.retained)
    for _ in range(200):
        state = select_next_epoch(state, np.ones(10), cfg, rng)
        seen |= set(state.retained)
    assert seen == set(range(20))
