import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import payoff_by_definition
from spintop.ingest import GameRecord, Outcome
from spintop.payoff import (
    BinScheme,
    EloBinner,
    PayoffMatrix,
    PayoffMatrixBuilder,
    build_payoff_matrix,
    expected_score,
    expected_win_probability,
    make_bin_scheme,
)


def rec(w, b, outcome):
    return GameRecord(w, b, Outcome(outcome), "t")


# bins ------------------------------------------------------------------------

def test_two_bins_of_twenty():
    s = make_bin_scheme((1000, 1040), 20)
    assert [(b.lower, b.upper) for b in s.bins] == [(1000, 1020), (1020, 1040)]


def test_default_range_has_230_bins():
    assert make_bin_scheme((600, 2900), 10).m == 230


@pytest.mark.parametrize("rng_,width", [((600, 605), 10), ((600, 700), 0), ((600, 700), -5),
                                        ((700, 600), 10)])
def test_degenerate_schemes_rejected(rng_, width):
    with pytest.raises(ValueError):
        make_bin_scheme(rng_, width)


def test_last_bin_clipped_and_closed():
    s = make_bin_scheme((0, 25), 10)
    assert list(s.edges) == [0, 10, 20, 25]
    assert list(s.bin_index([0, 9.99, 10, 25, 25.01, -1])) == [0, 0, 1, 2, -1, -1]


def test_binner_estimator():
    b = EloBinner((1000, 1040), 20).fit()
    assert list(b.transform([1000, 1030, 999])) == [0, 1, -1]
    assert b.get_params() == {"bin_range": (1000, 1040), "bin_width": 20}


# Elo -------------------------------------------------------------------------

@pytest.mark.parametrize("diff,p", [(0, 0.5), (400, 10 / 11), (-400, 1 / 11)])
def test_win_probability(diff, p):
    assert expected_win_probability(1500 + diff, 1500) == p


@pytest.mark.parametrize("diff,s", [(0, 0.0), (400, 9 / 11), (-400, -9 / 11)])
def test_expected_score(diff, s):
    assert expected_score(1500 + diff, 1500) == s


@given(st.floats(-3000, 3000), st.floats(-3000, 3000))
def test_elo_complement_and_antisymmetry(a, b):
    assert expected_win_probability(a, b) + expected_win_probability(b, a) == pytest.approx(1)
    assert expected_score(a, b) == -expected_score(b, a)


@given(st.floats(-2000, 2000), st.floats(1.0, 500))
def test_win_probability_increasing(d, gap):
    assert expected_win_probability(d + gap, 0) > expected_win_probability(d, 0)


# construction ----------------------------------------------------------------

def test_single_bin_single_game():
    p = build_payoff_matrix([rec(1505, 1505, 1)], BinScheme(np.array([1500.0, 1510.0])))
    assert p.entries.tolist() == [[0.0]]


def test_two_bins_both_directions_won_by_first_bin():
    s = make_bin_scheme((1000, 1040), 20)
    p = build_payoff_matrix([rec(1005, 1025, 1), rec(1025, 1005, -1)], s)
    assert p.entries[0, 1] == 1.0 and p.entries[1, 0] == -1.0
    assert p.fill_mask[0, 1]


def test_elo_fill_for_400_point_gap():
    s = BinScheme(np.array([1390.0, 1410.0, 1790.0, 1810.0]))
    # only a game inside the first bin, so the (0, 2) pair is fully predicted
    p = build_payoff_matrix([rec(1400, 1400, 0)], s)
    assert p.entries[0, 2] == -9 / 11
    assert not p.fill_mask[0, 2]


def test_mixed_fill():
    s = make_bin_scheme((1000, 1040), 20)  # midpoints 1010, 1030
    p = build_payoff_matrix([rec(1001, 1021, 0)], s)  # bin 0 as White drew
    predicted = expected_score(1010, 1030)
    assert p.entries[0, 1] == (0.0 + predicted) / 2
    assert not p.fill_mask[0, 1]


def test_black_side_is_taken_from_first_bin_perspective():
    s = make_bin_scheme((1000, 1040), 20)
    # bin 1 plays White against bin 0 and wins: bin 0 scores -1 as Black
    p = build_payoff_matrix([rec(1030, 1010, 1), rec(1010, 1030, 1)], s)
    assert p.entries[0, 1] == 0.0


def test_means_over_repeated_games():
    s = make_bin_scheme((1000, 1040), 20)
    games = [rec(1010, 1030, 1), rec(1010, 1030, 1), rec(1010, 1030, -1),
             rec(1030, 1010, 0)]
    assert build_payoff_matrix(games, s).entries[0, 1] == pytest.approx((1 / 3 + 0) / 2)


def test_out_of_range_records_are_skipped_and_counted():
    s = make_bin_scheme((1000, 1040), 20)
    p = build_payoff_matrix([rec(1010, 1030, 1), rec(900, 1030, 1), rec(1010, 5000, -1)], s)
    assert p.skipped_count == 2


def test_all_out_of_range():
    with pytest.raises(ValueError, match="no in-range records"):
        build_payoff_matrix([rec(100, 200, 1)], make_bin_scheme((1000, 1040), 20))


def test_no_records():
    with pytest.raises(ValueError, match="no records"):
        build_payoff_matrix([], make_bin_scheme((1000, 1040), 20))


def test_payoff_matrix_rejects_bad_entries():
    with pytest.raises(ValueError):
        PayoffMatrix(np.array([[0, 0.5], [0.4, 0]]))
    with pytest.raises(ValueError):
        PayoffMatrix(np.array([[0, 2.0], [-2.0, 0]]))


_game = st.tuples(st.integers(990, 1100), st.integers(990, 1100), st.sampled_from([1, 0, -1]))
_inside = st.tuples(st.integers(1000, 1099), st.integers(1000, 1099), st.sampled_from([1, 0, -1]))


@given(st.lists(_game, min_size=1, max_size=40))
@settings(max_examples=80, deadline=None)
def test_matches_pairwise_definition(games):
    edges = [1000.0, 1020.0, 1050.0, 1060.0, 1090.0]
    s = BinScheme(np.array(edges))
    try:
        p = build_payoff_matrix([rec(*g) for g in games], s)
    except ValueError:
        assert all(s.bin_index([w])[0] < 0 or s.bin_index([b])[0] < 0 for w, b, _ in games)
        return
    expect = payoff_by_definition(games, edges)
    np.testing.assert_allclose(p.entries, expect, atol=1e-15)
    assert np.array_equal(p.entries, -p.entries.T)
    assert np.all(np.abs(p.entries) <= 1)


@given(st.lists(_inside, min_size=1, max_size=30), st.permutations(range(4)))
@settings(max_examples=50, deadline=None)
def test_permutation_equivariance(games, perm):
    edges = [1000.0, 1025.0, 1050.0, 1075.0, 1100.0]
    p = build_payoff_matrix([rec(*g) for g in games], BinScheme(np.array(edges)))
    # relabel bins by moving each game's ratings to the permuted bin
    inv = np.argsort(perm)
    lows = np.array(edges[:-1])

    def move(r):
        i = min(int((r - 1000) // 25), 3)
        return int(lows[inv[i]] + (r - lows[i]))

    moved = [rec(move(w), move(b), o) for w, b, o in games]
    q = build_payoff_matrix(moved, BinScheme(np.array(edges)))
    observed = p.fill_mask
    # Elo fills depend on midpoints, so compare only fully observed pairs
    pm = np.asarray(perm)
    np.testing.assert_array_equal(q.fill_mask, observed[np.ix_(pm, pm)])
    mask = q.fill_mask
    np.testing.assert_allclose(q.entries[mask], p.entries[np.ix_(pm, pm)][mask], atol=1e-15)


def test_permuted_method_matches_indexing():
    a = np.array([[0, 0.3, -0.2], [-0.3, 0, 0.1], [0.2, -0.1, 0]])
    p = PayoffMatrix(a).permuted([2, 0, 1])
    np.testing.assert_array_equal(p.entries, a[np.ix_([2, 0, 1], [2, 0, 1])])


@given(st.lists(_inside, min_size=1, max_size=30), st.integers(0, 3), st.integers(0, 3))
@settings(max_examples=80, deadline=None)
def test_adding_a_win_never_lowers_the_entry(games, i, j):
    edges = [1000.0, 1025.0, 1050.0, 1075.0, 1100.0]
    s = BinScheme(np.array(edges))
    base = [rec(*g) for g in games]
    before = build_payoff_matrix(base, s).entries[i, j]
    extra = rec(int(edges[i]) + 1, int(edges[j]) + 1, 1)
    after = build_payoff_matrix(base + [extra], s).entries[i, j]
    assert after >= before - 1e-15


def test_elo_predicted_entries_are_strictly_inside():
    s = make_bin_scheme((600, 2900), 10)
    p = build_payoff_matrix([rec(1500, 1500, 1)], s)
    off = ~np.eye(s.m, dtype=bool)
    assert np.all(np.abs(p.entries[off]) < 1)


def test_builder_estimator():
    est = PayoffMatrixBuilder((1000, 1040), 20).fit([rec(1005, 1025, 1), rec(1025, 1005, -1)])
    assert est.payoff_.entries[0, 1] == 1.0
    assert est.n_skipped_ == 0


def test_win_probability_matches_logistic_form():
    from scipy.special import expit

    d = np.linspace(-3000, 3000, 2001)
    np.testing.assert_allclose(expected_win_probability(d, 0),
                               expit(np.log(10) / 400 * d), atol=1e-15)
