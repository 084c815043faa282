"""Qualitative analysis of two-player concurrent games.

Positive and almost-sure reachability use the usual one-step predecessor
operators with randomised choices:

* ``Ppre(X)``: for every opponent action some own action reaches ``X`` with
  positive probability, so playing uniformly hits ``X`` with positive
  probability whatever the opponent does.
* ``Apre(Y, X)``: restricted to the actions that surely stay in ``Y``, the
  same condition towards ``X``.

Almost-sure reachability is ``nu Y. mu X. T | (A & Apre(Y, X))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import CoalitionGame, induced_mdp
from .mdp import prob1_min


@dataclass
class QualSets:
    S0: np.ndarray
    S1: np.ndarray
    Sinf: np.ndarray | None = None
    witness: dict[int, np.ndarray] = field(default_factory=dict)


def _block_supports(g: CoalitionGame):
    cache = getattr(g, "_block_support", None)
    if cache is None:
        cache = [(b, b.probs > 0) for b in g.blocks()]
        g._block_support = cache
    return cache


def _oriented(supp: np.ndarray, player: int) -> np.ndarray:
    """Put the acting player's actions on axis 1."""
    return supp if player == 1 else supp.transpose(0, 2, 1, 3)


def ppre(g: CoalitionGame, X: np.ndarray, player: int = 1) -> np.ndarray:
    out = np.zeros(g.n, dtype=bool)
    for b, supp in _block_supports(g):
        s = _oriented(supp, player)
        hit = (s & X[b.succ][:, None, None, :]).any(-1)
        out[b.states] = hit.any(1).all(1)
    return out


def apre(g: CoalitionGame, Y: np.ndarray, X: np.ndarray, player: int = 1, stays: dict | None = None) -> np.ndarray:
    out = np.zeros(g.n, dtype=bool)
    for b, supp in _block_supports(g):
        s = _oriented(supp, player)
        inside = ~(s & ~Y[b.succ][:, None, None, :]).any(-1)      # (nb, own, opp)
        stay = inside.all(2)                                       # own actions safe against every opp action
        hit = (s & X[b.succ][:, None, None, :]).any(-1)
        ok = stay.any(1) & (hit & stay[:, :, None]).any(1).all(1)
        out[b.states] = ok
        if stays is not None:
            for k in np.flatnonzero(ok):
                stays[int(b.states[k])] = stay[k]
    return out


def positive_reach(g: CoalitionGame, target, allowed, player: int = 1) -> np.ndarray:
    """States where ``player`` reaches ``target`` via ``allowed`` with positive probability."""
    X = target.copy()
    while True:
        new = X | (allowed & ppre(g, X, player))
        if (new == X).all():
            return X
        X = new


def almost_sure_reach(g: CoalitionGame, target, allowed, player: int = 1, witness: bool = False):
    """States where ``player`` reaches ``target`` via ``allowed`` almost surely.

    With ``witness`` also returns, for each winning non-target state, a
    uniform distribution over the safe actions of the final iteration,
    which is an almost-sure winning memoryless strategy.
    """
    Y = np.ones(g.n, dtype=bool)
    while True:
        stays: dict[int, np.ndarray] = {}
        X = target.copy()
        while True:
            new = X | (allowed & apre(g, Y, X, player, stays if witness else None))
            if (new == X).all():
                break
            X = new
        if (X == Y).all():
            break
        Y = X
    if not witness:
        return Y
    strat = {}
    for s in np.flatnonzero(Y & ~target):
        safe = stays[int(s)].astype(float)
        strat[int(s)] = safe / safe.sum()
    return Y, strat


def prob0_prob1(g: CoalitionGame, sat1, sat2, minimize: bool = False) -> QualSets:
    """States with value 0 and value 1 for ``sat1 U sat2``.

    Player 1 maximises the probability unless ``minimize`` is set, in which
    case player 2 is the one trying to reach the target.
    """
    reacher = 2 if minimize else 1
    S0 = ~positive_reach(g, sat2, sat1, reacher)
    S1, strat = almost_sure_reach(g, sat2, sat1, reacher, witness=True)
    return QualSets(S0, S1, witness=strat)


def infinite_reward_states(g: CoalitionGame, target) -> np.ndarray:
    """States from which player 1 cannot reach ``target`` almost surely."""
    return ~almost_sure_reach(g, target, np.ones(g.n, dtype=bool), 1)


@dataclass
class AssumptionReport:
    name: str
    ok: bool
    violations: list[str]
    detail: str = ""

    def __str__(self) -> str:
        if self.ok:
            return f"{self.name}: satisfied"
        return f"{self.name}: violated at states {', '.join(self.violations)}" + (f" ({self.detail})" if self.detail else "")


def zero_absorbing(g: CoalitionGame, reward: str) -> np.ndarray:
    """Largest set of zero-reward states that no joint action can leave."""
    act, state = g.reward_arrays(reward)
    zero = np.array([state[s] == 0 and not act[s].any() for s in range(g.n)])
    Z = zero.copy()
    while True:
        new = Z.copy()
        for s in np.flatnonzero(Z):
            live = g.probs[s].reshape(-1, len(g.succ[s])).max(axis=0) > 0
            if not Z[g.succ[s][live]].all():
                new[s] = False
        if (new == Z).all():
            return Z
        Z = new


def _reached_under_all(g: CoalitionGame, goal: np.ndarray) -> np.ndarray:
    m = induced_mdp(g)
    return prob1_min(m, np.ones(g.n, dtype=bool), goal)


def check_reward_loops(g: CoalitionGame, reward: str, target, states=None) -> AssumptionReport:
    """Negative-reward states must reach ``target`` or a zero-reward trap surely under all profiles."""
    act, state = g.reward_arrays(reward)
    negative = np.array([state[s] < 0 or (act[s] < 0).any() for s in range(g.n)])
    if states is not None:
        negative &= states
    if not negative.any():
        return AssumptionReport("negative-reward loops", True, [])
    good = _reached_under_all(g, target | zero_absorbing(g, reward))
    bad = np.flatnonzero(negative & ~good)
    return AssumptionReport("negative-reward loops", bad.size == 0, [g.state_names[s] for s in bad],
                            "negative rewards on a path that may avoid the target forever")


def check_unavoidable(g: CoalitionGame, targets, states=None, name: str = "unavoidable targets") -> AssumptionReport:
    """Every objective target must be reached almost surely under all profiles."""
    scope = np.ones(g.n, dtype=bool) if states is None else states
    bad = np.zeros(g.n, dtype=bool)
    for t in targets:
        bad |= scope & ~_reached_under_all(g, t)
    idx = np.flatnonzero(bad)
    return AssumptionReport(name, idx.size == 0, [g.state_names[s] for s in idx],
                            "some profile avoids an objective's target with positive probability")
