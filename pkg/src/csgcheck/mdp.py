"""MDP model checking: extremal probabilities and expected rewards.

Used directly for the "both coalitions cooperate" computations and as the
switch target once one player's objective in an equilibrium query is
decided. All sweeps are vectorised over (state, action) rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import Mdp
from .objectives import CumulObj, InstObj, NextObj, ReachRewObj, UntilObj

EPS_VI = 1e-6
MAX_ITERS = 500_000


@dataclass
class MdpResult:
    """Values and an optimal strategy.

    For unbounded objectives ``strategy[s]`` is an action index. For
    bounded ones ``layers[r]`` / ``layer_strategy[r]`` give values and
    actions with ``r`` steps remaining (``values`` is the top layer).
    """
    values: np.ndarray
    strategy: np.ndarray | None = None
    layers: list[np.ndarray] | None = None
    layer_strategy: list[np.ndarray] | None = None
    iterations: int = 0
    converged: bool = True
    diagnostics: list[str] = field(default_factory=list)


def rel_diff(new: np.ndarray, old: np.ndarray) -> float:
    """Maximum relative difference, absolute where the new value is zero."""
    with np.errstate(invalid="ignore"):
        d = np.abs(new - old)
        d = np.where(np.isinf(new) & np.isinf(old) & (new == old), 0.0, d)
        denom = np.abs(new)
        r = np.where(denom > 0, d / np.where(denom > 0, denom, 1.0), d)
    return float(r.max(initial=0.0))


# --- qualitative --------------------------------------------------------

def _rows_any(m: Mdp, rows: np.ndarray) -> np.ndarray:
    return np.maximum.reduceat(rows.astype(np.int8), m.row_ptr[:-1]).astype(bool)


def _rows_hit(m: Mdp, X: np.ndarray) -> np.ndarray:
    return (m.T_bool @ X.astype(np.int32)) > 0


def _rows_within(m: Mdp, Y: np.ndarray) -> np.ndarray:
    return (m.T_bool @ (~Y).astype(np.int32)) == 0


def prob0_max(m: Mdp, sat1, sat2) -> np.ndarray:
    """States from which no strategy reaches ``sat2`` via ``sat1``."""
    X = sat2.copy()
    while True:
        new = X | (sat1 & _rows_any(m, _rows_hit(m, X)))
        if (new == X).all():
            return ~X
        X = new


def prob1_max(m: Mdp, sat1, sat2, witness: bool = False):
    """States with an almost-sure strategy for ``sat1 U sat2``.

    With ``witness`` also returns one action per state of the set that
    stays inside it and makes progress towards ``sat2``.
    """
    Y = np.ones(m.n, dtype=bool)
    while True:
        X = sat2.copy()
        stay = _rows_within(m, Y)
        choice = np.full(m.n, -1)
        while True:
            ok = stay & _rows_hit(m, X)
            new = X | (sat1 & _rows_any(m, ok))
            added = new & ~X
            if added.any():
                for s in np.flatnonzero(added):
                    lo, hi = m.row_ptr[s], m.row_ptr[s + 1]
                    choice[s] = int(np.flatnonzero(ok[lo:hi])[0])
            if (new == X).all():
                break
            X = new
        if (X == Y).all():
            return (Y, choice) if witness else Y
        Y = X


def prob0_min(m: Mdp, sat1, sat2) -> np.ndarray:
    """States where some strategy avoids ``sat1 U sat2`` surely."""
    Z = ~sat2
    while True:
        new = ~sat2 & (~sat1 | _rows_any(m, _rows_within(m, Z)))
        if (new == Z).all():
            return Z
        Z = new


def prob1_min(m: Mdp, sat1, sat2) -> np.ndarray:
    """States where every strategy satisfies ``sat1 U sat2`` almost surely."""
    X = prob0_min(m, sat1, sat2)
    while True:
        new = X | (sat1 & ~sat2 & _rows_any(m, _rows_hit(m, X)))
        if (new == X).all():
            return ~X
        X = new


# --- quantitative -------------------------------------------------------

def _best_rows(m: Mdp, q: np.ndarray, v: np.ndarray, opt: str) -> np.ndarray:
    """Rows whose value is optimal for their state (within a small tolerance)."""
    target = v[m.row_state]
    tol = 1e-9 * np.maximum(1.0, np.abs(np.where(np.isfinite(target), target, 0.0)))
    with np.errstate(invalid="ignore"):
        if opt == "max":
            return (q >= target - tol) | (np.isinf(target) & (q == target))
        return (q <= target + tol) | (np.isinf(target) & (q == target))


def _first_rows(m: Mdp, rows: np.ndarray) -> np.ndarray:
    out = np.zeros(m.n, dtype=int)
    idx = np.flatnonzero(rows)
    states = m.row_state[idx]
    # keep the first flagged row of each state
    first = np.unique(states, return_index=True)
    out[first[0]] = idx[first[1]] - m.row_ptr[first[0]]
    return out


def _progress_strategy(m: Mdp, good_rows: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Pick, per state, an allowed row that moves towards ``goal``.

    Backward breadth-first search over ``good_rows``; states never reached
    fall back to their first allowed row.
    """
    strategy = _first_rows(m, good_rows)
    done = goal.copy()
    frontier = goal.copy()
    while frontier.any():
        hit = _rows_hit(m, frontier) & good_rows & ~done[m.row_state]
        if not hit.any():
            break
        first = {}
        for r in np.flatnonzero(hit):
            s = m.row_state[r]
            if s not in first:
                first[s] = r - m.row_ptr[s]
        frontier = np.zeros(m.n, dtype=bool)
        for s, a in first.items():
            strategy[s] = a
            done[s] = True
            frontier[s] = True
    return strategy


def _until_unbounded(m: Mdp, opt: str, sat1, sat2, eps, max_iters) -> MdpResult:
    if opt == "max":
        no = prob0_max(m, sat1, sat2)
        yes, witness = prob1_max(m, sat1, sat2, witness=True)
    else:
        no = prob0_min(m, sat1, sat2)
        yes = prob1_min(m, sat1, sat2)
    maybe = ~(no | yes)
    v = yes.astype(float)
    it, converged = 0, True
    if maybe.any():
        converged = False
        while it < max_iters:
            it += 1
            new = m.reduce(m.T @ v, opt)
            new[yes] = 1.0
            new[no] = 0.0
            done = rel_diff(new, v) < eps
            v = new
            if done:
                converged = True
                break
    q = m.T @ v
    if opt == "max":
        good = _best_rows(m, q, v, "max")
        strategy = _progress_strategy(m, good, yes)
        for s in np.flatnonzero(yes & ~sat2):
            strategy[s] = witness[s]
    else:
        strategy = _first_rows(m, _best_rows(m, q, v, "min"))
    return MdpResult(v, strategy, iterations=it, converged=converged)


def _layered(m: Mdp, opt: str, base: np.ndarray, k: int, step) -> MdpResult:
    layers, strategies = [base], [np.zeros(m.n, dtype=int)]
    v = base
    for _ in range(k):
        q = step(v)
        new = m.reduce(q, opt)
        strategies.append(_first_rows(m, _best_rows(m, q, new, opt)))
        layers.append(new)
        v = new
    return MdpResult(layers[-1], strategies[-1], layers, strategies, iterations=k)


def mdp_prob(m: Mdp, opt: str, obj, eps: float = EPS_VI, max_iters: int = MAX_ITERS) -> MdpResult:
    """Optimal probability of a Next or (bounded) Until objective."""
    if isinstance(obj, NextObj):
        base = obj.sat.astype(float)
        return _layered(m, opt, base, 1, lambda v: m.T @ v)
    if not isinstance(obj, UntilObj):
        raise TypeError(f"not a probabilistic objective: {obj!r}")
    if obj.bound is None:
        return _until_unbounded(m, opt, obj.sat1, obj.sat2, eps, max_iters)
    sat1, sat2 = obj.sat1, obj.sat2
    base = sat2.astype(float)
    layers, strategies = [base], [np.zeros(m.n, dtype=int)]
    v = base
    for _ in range(obj.bound):
        q = m.T @ v
        new = m.reduce(q, opt)
        new[sat2] = 1.0
        new[~sat1 & ~sat2] = 0.0
        strategies.append(_first_rows(m, _best_rows(m, q, new, opt)))
        layers.append(new)
        v = new
    return MdpResult(v, strategies[-1], layers, strategies, iterations=obj.bound)


def _reach_reward(m: Mdp, opt: str, reward: str, target: np.ndarray, eps, max_iters,
                  gamma: float | None = None) -> MdpResult:
    everything = np.ones(m.n, dtype=bool)
    if opt == "max":
        finite = prob1_min(m, everything, target)
    else:
        finite = prob1_max(m, everything, target)
    inf = ~finite
    r = m.row_rewards(reward)
    r = np.where(target[m.row_state], 0.0, r)
    # rows that may lead to an infinite state are only kept for max, where they are inf anyway
    bad_rows = _rows_hit(m, inf)
    active = finite & ~target
    v = np.zeros(m.n)
    v[inf] = np.inf

    def sweep(vals, rew):
        with np.errstate(invalid="ignore"):
            q = rew + m.T @ np.where(np.isinf(vals), 0.0, vals)
        q = np.where(bad_rows, np.inf, q)
        new = m.reduce(q, opt)
        new[target] = 0.0
        new[inf] = np.inf
        return new, q

    def run(vals, rew):
        it = 0
        while it < max_iters:
            it += 1
            new, _ = sweep(vals, rew)
            done = rel_diff(new[active], vals[active]) < eps
            vals = new
            if done:
                return vals, it, True
        return vals, it, False

    iters = 0
    if opt == "min" and active.any():
        nz = np.abs(r[r != 0])
        g = gamma if gamma is not None else (float(nz.mean()) if nz.size else 1.0)
        v, it1, _ = run(v, np.where(r == 0, g, r))
        iters += it1
    v, it2, converged = run(v, r) if active.any() else (v, 0, True)
    iters += it2
    _, q = sweep(v, r)
    good = _best_rows(m, q, v, opt) & ~bad_rows
    if opt == "min":
        strategy = _progress_strategy(m, good, target | inf)
    else:
        strategy = _first_rows(m, good)
    return MdpResult(v, strategy, iterations=iters, converged=converged)


def mdp_reward(m: Mdp, opt: str, obj, eps: float = EPS_VI, max_iters: int = MAX_ITERS,
               gamma: float | None = None) -> MdpResult:
    """Optimal expected reward for I=k, C<=k or F phi."""
    if isinstance(obj, InstObj):
        base = m.rewards[obj.reward][1].astype(float)
        return _layered(m, opt, base, obj.k, lambda v: m.T @ v)
    if isinstance(obj, CumulObj):
        r = m.row_rewards(obj.reward)
        return _layered(m, opt, np.zeros(m.n), obj.k, lambda v: r + m.T @ v)
    if isinstance(obj, ReachRewObj):
        return _reach_reward(m, opt, obj.reward, obj.target, eps, max_iters, gamma)
    raise TypeError(f"not a reward objective: {obj!r}")


def mdp_solve(m: Mdp, opt: str, obj, **kw) -> MdpResult:
    """Dispatch on the objective kind."""
    if isinstance(obj, (NextObj, UntilObj)):
        kw.pop("gamma", None)
        return mdp_prob(m, opt, obj, **kw)
    return mdp_reward(m, opt, obj, **kw)
