import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from csgcheck.matrix import (Infeasible, MatrixGameError, Unbounded, lp_maximize, matrix_game_values,
                             saddle_point, solve_matrix_game)
from csgcheck.zerosum import solve_state

RPS = np.array([[0, -1, 1], [1, 0, -1], [-1, 1, 0]], dtype=float)


def test_rps_value_and_uniform_strategies():
    sol = solve_matrix_game(RPS)
    assert abs(sol.value) < 1e-9
    assert np.allclose(sol.x, 1 / 3, atol=1e-9)
    assert np.allclose(sol.y, 1 / 3, atol=1e-9)


def test_pure_saddle():
    Z = np.array([[3, 1], [4, 2]])
    assert saddle_point(Z) == (1, 1)
    sol = solve_matrix_game(Z)
    assert sol.value == 2
    assert sol.x.tolist() == [0, 1] and sol.y.tolist() == [0, 1]


def test_matching_pennies_min():
    Z = np.array([[1, 0], [0, 1]], dtype=float)
    sol = solve_matrix_game(Z, minimize=True)
    assert sol.value == pytest.approx(0.5)
    assert np.allclose(sol.x, 0.5)


def test_single_entry():
    assert solve_matrix_game([[7.5]]).value == 7.5


def test_rejects_bad_input():
    with pytest.raises(MatrixGameError):
        solve_matrix_game(np.zeros((0, 2)))
    with pytest.raises(MatrixGameError):
        solve_matrix_game([[np.nan, 1.0]])


def test_lp_textbook():
    # max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
    res = lp_maximize([3, 5], [[1, 0], [0, 2], [3, 2]], ["<="] * 3, [4, 12, 18])
    assert res.value == pytest.approx(36)
    assert np.allclose(res.x, [2, 6])


def test_lp_infeasible_and_unbounded():
    with pytest.raises(Infeasible):
        lp_maximize([1], [[1], [1]], ["<=", ">="], [1, 2])
    with pytest.raises(Unbounded):
        lp_maximize([1, 1], [[1, -1]], ["<="], [1])


def test_lp_equality_and_ge():
    # min x + y with x + y >= 2, x - y = 0 -> x = y = 1
    res = lp_maximize([-1, -1], [[1, 1], [1, -1]], [">=", "="], [2, 0])
    assert res.value == pytest.approx(-2)
    assert np.allclose(res.x, [1, 1])


def test_infinite_entries():
    Z = np.array([[np.inf, 1.0], [2.0, 3.0]])
    # maximiser avoids nothing; the minimiser must avoid column 0
    assert solve_state(Z, "max").value == 3.0
    # minimiser can only keep row 1
    assert solve_state(Z, "min").value == 3.0
    assert solve_state(np.full((2, 2), np.inf), "min").value == np.inf


games = st.tuples(st.integers(1, 5), st.integers(1, 5)).flatmap(
    lambda s: arrays(np.float64, s, elements=st.integers(-4, 4).map(float)))


@given(games)
def test_certified_guarantees(Z):
    sol = solve_matrix_game(Z)
    assert np.isclose(sol.x.sum(), 1) and np.isclose(sol.y.sum(), 1)
    assert (sol.x >= -1e-12).all() and (sol.y >= -1e-12).all()
    # x guarantees at least the value, y concedes at most the value
    assert (sol.x @ Z).min() >= sol.value - 1e-7
    assert (Z @ sol.y).max() <= sol.value + 1e-7


@given(games)
def test_minimize_is_negated_maximize(Z):
    assert solve_matrix_game(Z, minimize=True).value == pytest.approx(-solve_matrix_game(-Z).value, abs=1e-9)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_batched_kernel_matches_lp(l, m, seed):
    rng = np.random.default_rng(seed)
    Zs = rng.integers(-3, 4, size=(12, l, m)).astype(float) + rng.random((12, l, m)) * (seed % 2)
    fast = matrix_game_values(Zs)
    slow = np.array([solve_matrix_game(Z).value for Z in Zs])
    assert np.allclose(fast, slow, atol=1e-9)
    assert np.allclose(matrix_game_values(Zs, minimize=True),
                       [solve_matrix_game(Z, minimize=True).value for Z in Zs], atol=1e-9)
