import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import RPS, block_game, transitive
from oracles import random_skew
from spintop.dynamics import (
    CONVERGED,
    FixedMemoryFictitiousPlay,
    PopulationState,
    default_max_iters,
    init_population,
    run_fictitious_play,
    run_single,
    step,
    wr_performance,
)
from spintop.equilibrium import nash_clustering
from spintop.synthetic import SyntheticSpec, generate_synthetic


def test_init_weakest_two():
    assert init_population(transitive(5), 2).members == (4, 3)


def test_init_full_set():
    assert sorted(init_population(transitive(5), 5).members) == [0, 1, 2, 3, 4]


def test_init_tie_break_lowest_index():
    assert init_population(RPS, 1).members == (0,)


@pytest.mark.parametrize("k", [0, 6, -1])
def test_init_rejects_bad_k(k):
    with pytest.raises(ValueError):
        init_population(transitive(5), k)


def test_state_validation():
    with pytest.raises(ValueError):
        PopulationState((1, 1), 2)
    with pytest.raises(ValueError):
        PopulationState((1,), 2)


def test_step_transitive_picks_next_weakest():
    s = step(init_population(transitive(5), 1), transitive(5))
    assert s.members == (3,) and s.t == 1


def test_step_converges_on_full_rps():
    assert step(init_population(RPS, 3), RPS) is CONVERGED


def test_block_game_k1_cycles_inside_rps():
    a = block_game()
    s = init_population(a, 1)
    assert s.members == (3,)
    seen = []
    for _ in range(9):
        s = step(s, a)
        seen.append(s.members[0])
    assert set(seen) == {0, 1, 2}


def test_wr_examples():
    t = transitive(5)
    full = PopulationState(tuple(range(5)), 5, allocation=np.full(5, 0.2))
    assert wr_performance(full, t) == pytest.approx(0)
    top = PopulationState((0,), 1, allocation=np.ones(1))
    assert wr_performance(top, t) == pytest.approx(0.4)
    bottom = PopulationState((4,), 1, allocation=np.ones(1))
    assert wr_performance(bottom, t) == pytest.approx(-0.4)


def test_transitive_k1_converges_in_four_steps():
    res = run_single(transitive(5), 1)
    wr = [w for _, w in res.trace]
    assert res.converged and len(wr) == 5
    assert all(b > a for a, b in zip(wr, wr[1:]))
    assert wr[-1] == pytest.approx(0.4)


def test_block_game_k1_never_settles():
    # every RPS member alone already has the top row mean here, so failure
    # shows as endless cycling rather than a WR gap
    a = block_game()
    res = run_single(a, 1, max_iters=default_max_iters(4))
    assert not res.converged
    assert len(res.trace) == default_max_iters(4) + 1
    assert {p[0] for p in res.populations[-3:]} == {0, 1, 2}


def test_block_game_k3_covers_cluster():
    res = run_single(block_game(), 3)
    assert res.converged
    assert sorted(res.populations[-1]) == [0, 1, 2]


def test_k_errors_are_isolated():
    out = run_fictitious_play(transitive(5), [1, 9, 2])
    assert out[9].error is not None
    assert out[1].converged and out[2].converged


def test_max_iters_validated():
    with pytest.raises(ValueError):
        run_single(transitive(3), 1, max_iters=0)


@given(st.integers(0, 2**32 - 1), st.integers(3, 10), st.data())
@settings(max_examples=40, deadline=None)
def test_population_invariants(seed, m, data):
    a = random_skew(m, np.random.default_rng(seed))
    k = data.draw(st.integers(1, m))
    state = init_population(a, k)
    for _ in range(3 * m):
        nxt = step(state, a)
        if nxt is CONVERGED:
            break
        assert len(nxt.members) == k == len(set(nxt.members))
        # the newcomer beats the previous population on average
        assert a[nxt.members[-1], list(state.members)].sum() > 0
        assert nxt.members[:-1] == state.members[1:]
        state = nxt


@given(st.integers(2, 12), st.data())
@settings(max_examples=30, deadline=None)
def test_transitive_monotone_and_fast(m, data):
    k = data.draw(st.integers(1, m))
    res = run_single(transitive(m), k)
    wr = [w for _, w in res.trace]
    assert res.converged
    assert all(b >= a - 1e-15 for a, b in zip(wr, wr[1:]))
    assert len(wr) - 1 <= m - k


@pytest.mark.parametrize("layers", [(1, 3, 1), (1, 3, 5, 3, 1), (3, 5, 1), (1, 5, 3)])
def test_minimal_k_within_largest_cluster(layers):
    # a uniform mix over k > 1 distinct members cannot match a lone top
    # strategy's row mean, so the property is checked with NE allocation
    payoff = generate_synthetic(SyntheticSpec(layers), seed=4)
    a = payoff.entries
    m = a.shape[0]
    top = a.sum(axis=1).max() / m
    largest = nash_clustering(payoff).sizes.max()
    reached = [k for k in range(1, m + 1)
               if abs(run_single(a, k, m * m, "nash").final_wr - top) <= 1e-6]
    assert reached and min(reached) <= largest


def test_nash_allocation_weights_members():
    a = block_game()
    s = init_population(a, 3, allocation="nash")
    np.testing.assert_allclose(s.allocation.sum(), 1)


def test_unknown_allocation():
    with pytest.raises(ValueError):
        init_population(RPS, 1, allocation="softmax")


def test_estimator():
    est = FixedMemoryFictitiousPlay(k=1).fit(transitive(5))
    assert est.converged_ and est.n_iter_ == 4
    assert est.population_ == (0,)
    assert est.wr_[-1] == pytest.approx(0.4)


def test_uniform_allocation_cannot_match_a_lone_top_strategy():
    # with one strongest strategy, any uniform mix over k > 1 distinct members
    # averages in weaker rows, so the top row mean is out of reach
    a = generate_synthetic(SyntheticSpec((1, 3, 5, 3, 1)), seed=0).entries
    top = a.sum(axis=1).max() / a.shape[0]
    res = run_single(a, 5, allocation="uniform")
    assert res.converged
    assert res.final_wr < top - 0.1
