import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csgcheck.bimatrix import enumerate_ne, filter_dominated, scne, swne

from oracles import pure_deviation_gap, same_values, support_enumeration

A_STAG = np.array([[2, 2, 2], [0, 4, 6]], dtype=float)
B_STAG = np.array([[4, 2, 0], [4, 6, 9]], dtype=float)


def test_stag_hunt_equilibria():
    eqs = enumerate_ne(A_STAG, B_STAG)
    assert sorted(eqs.values()) == [(2, 4), (2, 4), (6, 9)]
    mixed = [e for e in eqs if 0 < e.x[0] < 1]
    assert len(mixed) == 1
    assert np.allclose(mixed[0].x, [5 / 9, 4 / 9], atol=1e-9)
    assert np.allclose(mixed[0].y, [2 / 3, 0, 1 / 3], atol=1e-9)


def test_stag_hunt_swne_scne():
    best = swne(A_STAG, B_STAG)
    assert best.values == (6, 9)
    assert best.x.tolist() == [0, 1] and best.y.tolist() == [0, 0, 1]
    worst = scne(A_STAG, B_STAG)
    assert worst.values == (2, 0)
    assert worst.x.tolist() == [1, 0] and worst.y.tolist() == [0, 0, 1]
    neg = enumerate_ne(-A_STAG, -B_STAG).values()
    assert same_values(neg, [(0, -4), (-2, -4), (-2, 0)], 1e-9)


def test_prisoners_dilemma_pure():
    A = np.array([[3, 0], [5, 1]])
    eqs = enumerate_ne(A, A.T)
    assert eqs.values() == [(1, 1)]


def test_domination_keeps_optimum():
    # row 2 is strictly dominated for the row player
    A = np.array([[1, 0], [0, 1], [-1, -1]], dtype=float)
    B = np.array([[0, 1], [1, 0], [5, 5]], dtype=float)
    _, _, rows, _ = filter_dominated(A, B)
    assert 2 not in rows
    assert sum(swne(A, B).values) == pytest.approx(sum(swne(A, B, prune=False).values))


def test_degenerate_game_still_solved():
    A = np.zeros((3, 3))
    best = swne(A, A)
    assert best.values == (0, 0)


small = st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))


@given(small)
def test_matches_support_enumeration(case):
    l, m, seed = case
    rng = np.random.default_rng(seed)
    A = rng.integers(-2, 3, size=(l, m)).astype(float)
    B = rng.integers(-2, 3, size=(l, m)).astype(float)
    eqs = enumerate_ne(A, B)
    for e in eqs:
        assert pure_deviation_gap(A, B, e.x, e.y) <= 1e-7
    oracle = support_enumeration(A, B)
    assert same_values(eqs.values(), [(u, v) for _, _, u, v in oracle])
    assert sum(swne(A, B).values) == pytest.approx(max(u + v for _, _, u, v in oracle), abs=1e-6)
    # social cost: players minimise, i.e. equilibria of the negated game
    costs = support_enumeration(-A, -B)
    assert sum(scne(A, B).values) == pytest.approx(-max(u + v for _, _, u, v in costs), abs=1e-6)


@given(small)
def test_scne_is_negated_swne(case):
    l, m, seed = case
    rng = np.random.default_rng(seed)
    A = rng.random((l, m))
    B = rng.random((l, m))
    lo, hi = scne(A, B), swne(-A, -B)
    assert lo.values == pytest.approx((-hi.u, -hi.v))
