"""Zero-sum values of coalition games.

Finite-horizon objectives are solved exactly by backward induction, one
matrix game per state and step. Unbounded until and expected reachability
rewards use value iteration. Player 1 (the coalition) optimises in the
direction ``opt``; player 2 does the opposite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import CoalitionGame
from .matrix import MatrixSolution, matrix_game_values, solve_matrix_game
from .mdp import EPS_VI, MAX_ITERS, rel_diff
from .objectives import CumulObj, InstObj, NextObj, ReachRewObj, UntilObj
from .qualitative import infinite_reward_states, prob0_prob1

CYCLE_START = 1000
CYCLE_WINDOW = 64
CYCLE_MAX_PERIOD = 32
CYCLE_TOL = 1e-9


@dataclass
class ZsResult:
    """Values with optional strategies.

    ``strategy[s] = (x, y)`` for unbounded objectives. Finite horizons keep
    one dict per number of remaining steps in ``layer_strategy`` and the
    matching values in ``layers``.
    """
    values: np.ndarray
    strategy: dict[int, tuple[np.ndarray, np.ndarray]] | None = None
    layers: list[np.ndarray] | None = None
    layer_strategy: list[dict] | None = None
    iterations: int = 0
    converged: bool = True
    diagnostics: list[dict] = field(default_factory=list)


# --- cycle detection (shared with the nonzero-sum engine) ----------------

def find_cycle(history: list[np.ndarray], tol: float = CYCLE_TOL) -> int | None:
    """Smallest period ``p`` with ``h[t] == h[t-p]`` over the whole window.

    A window that barely moves is slow convergence, not a cycle.
    """
    if len(history) < CYCLE_WINDOW:
        return None
    H = np.array(history[-CYCLE_WINDOW:])
    finite = np.where(np.isfinite(H), H, 0.0)
    if np.abs(np.diff(finite, axis=0)).max(initial=0.0) <= tol:
        return None
    for p in range(1, CYCLE_MAX_PERIOD + 1):
        if np.abs(finite[p:] - finite[:-p]).max(initial=0.0) <= tol:
            return p
    return None


def cycle_report(history, period: int, names, iteration: int, what: str = "values") -> dict:
    H = np.array(history[-period:])
    amp = H.max(axis=0) - H.min(axis=0)
    moving = np.flatnonzero(amp > CYCLE_TOL)
    return {
        "kind": "oscillation",
        "what": what,
        "iteration": iteration,
        "period": period,
        "amplitude": float(amp.max(initial=0.0)),
        "states": {names[s]: [float(v) for v in H[:, s]] for s in moving},
        "message": "values may oscillate: iteration stopped on a detected cycle",
    }


# --- one-step games ------------------------------------------------------

def _restrict_inf(Z: np.ndarray, opt: str):
    """Drop the strategies of the player who must avoid infinite entries.

    Any pure action with an infinite entry somewhere is fatal for the
    player trying to keep the value finite, since the other player can put
    a little weight on the matching action. Returns the kept indices or
    ``None`` if the value is infinite.
    """
    bad = np.isinf(Z)
    if opt == "max":
        keep = np.flatnonzero(~bad.any(axis=0))
    else:
        keep = np.flatnonzero(~bad.any(axis=1))
    return keep if keep.size else None


def solve_state(Z: np.ndarray, opt: str) -> MatrixSolution:
    """Matrix game for one state, tolerating ``+inf`` entries."""
    l, m = Z.shape
    if not np.isinf(Z).any():
        return solve_matrix_game(Z, minimize=opt == "min")
    keep = _restrict_inf(Z, opt)
    if keep is None:
        return MatrixSolution(np.inf, np.full(l, 1.0 / l), np.full(m, 1.0 / m))
    if opt == "max":
        sub = solve_matrix_game(Z[:, keep])
        y = np.zeros(m)
        y[keep] = sub.y
        return MatrixSolution(sub.value, sub.x, y)
    sub = solve_matrix_game(Z[keep, :], minimize=True)
    x = np.zeros(l)
    x[keep] = sub.x
    return MatrixSolution(sub.value, x, sub.y)


def _block_matrices(g: CoalitionGame, b, v: np.ndarray, reward: str | None = None) -> np.ndarray:
    vs = v[b.succ]
    inf = np.isinf(vs)
    if inf.any():
        Z = np.einsum("bijk,bk->bij", b.probs, np.where(inf, 0.0, vs))
        hits = np.einsum("bijk,bk->bij", (b.probs > 0).astype(float), inf.astype(float)) > 0
        Z[hits] = np.inf
    else:
        Z = np.einsum("bijk,bk->bij", b.probs, vs)
    if reward is not None:
        Z = Z + g.block_rewards(reward, b)
    return Z


def one_step(g: CoalitionGame, v: np.ndarray, opt: str, reward: str | None = None,
             active: np.ndarray | None = None) -> np.ndarray:
    """Value of the one-step game at every state, given successor values ``v``."""
    out = np.zeros(g.n)
    for b in g.blocks():
        sel = np.ones(len(b.states), dtype=bool) if active is None else active[b.states]
        if not sel.any():
            continue
        Z = _block_matrices(g, b, v, reward)[sel]
        states = b.states[sel]
        has_inf = np.isinf(Z).any(axis=(1, 2))
        if (~has_inf).any():
            out[states[~has_inf]] = matrix_game_values(Z[~has_inf], minimize=opt == "min")
        for k in np.flatnonzero(has_inf):
            out[states[k]] = solve_state(Z[k], opt).value
    return out


def one_step_strategies(g: CoalitionGame, v: np.ndarray, opt: str, reward: str | None = None,
                        states=None) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Optimal mixed actions of both players in the one-step games."""
    wanted = np.ones(g.n, dtype=bool) if states is None else states
    out = {}
    for b in g.blocks():
        sel = wanted[b.states]
        if not sel.any():
            continue
        Z = _block_matrices(g, b, v, reward)
        for k in np.flatnonzero(sel):
            sol = solve_state(Z[k], opt)
            out[int(b.states[k])] = (sol.x, sol.y)
    return out


# --- finite horizon ------------------------------------------------------

def zs_finite(g: CoalitionGame, obj, opt: str = "max", synth: bool = False) -> ZsResult:
    """Backward induction for Next, bounded until, I=k and C<=k."""
    reward = None
    pin1 = pin0 = None
    if isinstance(obj, NextObj):
        base, k = obj.sat.astype(float), 1
    elif isinstance(obj, UntilObj) and obj.bound is not None:
        base, k = obj.sat2.astype(float), obj.bound
        pin1, pin0 = obj.sat2, ~obj.sat1 & ~obj.sat2
    elif isinstance(obj, InstObj):
        base, k = g.reward_arrays(obj.reward)[1].astype(float), obj.k
    elif isinstance(obj, CumulObj):
        base, k, reward = np.zeros(g.n), obj.k, obj.reward
    else:
        raise TypeError(f"not a finite-horizon objective: {obj!r}")
    free = None if pin1 is None else ~(pin1 | pin0)
    layers, strats = [base], [{}]
    v = base
    for _ in range(k):
        new = one_step(g, v, opt, reward, free)
        if pin1 is not None:
            new[pin1] = 1.0
            new[pin0] = 0.0
        strats.append(one_step_strategies(g, v, opt, reward, free) if synth else {})
        layers.append(new)
        v = new
    return ZsResult(v, strats[-1] if synth else None, layers, strats if synth else None, iterations=k)


# --- value iteration -----------------------------------------------------

def _iterate(g, v, step, active, eps, max_iters, names, diagnostics):
    """Iterate ``step`` until the values of ``active`` states settle."""
    history: list[np.ndarray] = []
    it = 0
    while it < max_iters:
        it += 1
        new = step(v)
        done = rel_diff(new[active], v[active]) < eps
        v = new
        if done:
            return v, it, True
        if it >= CYCLE_START - CYCLE_WINDOW:
            history.append(v.copy())
            if len(history) > CYCLE_WINDOW:
                history.pop(0)
            if it >= CYCLE_START:
                p = find_cycle(history)
                if p is not None:
                    diagnostics.append(cycle_report(history, p, names, it))
                    return v, it, False
    diagnostics.append({"kind": "iteration-limit", "iteration": it,
                        "message": f"no convergence within {max_iters} iterations"})
    return v, it, False


def zs_until(g: CoalitionGame, sat1, sat2, opt: str = "max", eps: float = EPS_VI,
             max_iters: int = MAX_ITERS, synth: bool = False, reachable_only: bool = False) -> ZsResult:
    """Value iteration for ``sat1 U sat2`` with the 0/1 states fixed up front.

    With ``reachable_only`` states unreachable from the initial ones are
    left out of the sweeps and come back as NaN.
    """
    qual = prob0_prob1(g, sat1, sat2, minimize=opt == "min")
    S0, S1 = qual.S0, qual.S1
    maybe = ~(S0 | S1)
    live = g.reachable if reachable_only else np.ones(g.n, dtype=bool)
    sweep = maybe & live
    v = S1.astype(float)
    diagnostics: list[dict] = []

    def step(vals):
        new = one_step(g, vals, opt, active=sweep)
        new[S1] = 1.0
        new[S0] = 0.0
        return new

    it, converged = 0, True
    if sweep.any():
        v, it, converged = _iterate(g, v, step, sweep, eps, max_iters, g.state_names, diagnostics)
    v[maybe & ~live] = np.nan
    strategy = None
    if synth:
        strategy = one_step_strategies(g, v, opt, states=live)
        for s, x in qual.witness.items():
            if s not in strategy:
                continue
            if opt == "max":
                strategy[s] = (x, strategy[s][1])
            else:
                strategy[s] = (strategy[s][0], x)
    return ZsResult(v, strategy, iterations=it, converged=converged, diagnostics=diagnostics)


def zs_reach_reward(g: CoalitionGame, reward: str, target, opt: str = "max", gamma: float | None = None,
                    eps: float = EPS_VI, max_iters: int = MAX_ITERS, synth: bool = False,
                    reachable_only: bool = False) -> ZsResult:
    """Expected reward accumulated until ``target``; infinite if it may be missed.

    When minimising, zero rewards first get lifted to ``gamma`` to obtain
    an upper bound, then the true rewards are iterated down from there.
    Maximising iterates up from zero.
    """
    inf = infinite_reward_states(g, target)
    live = g.reachable if reachable_only else np.ones(g.n, dtype=bool)
    active = ~inf & ~target & live
    v = np.zeros(g.n)
    v[inf] = np.inf
    diagnostics: list[dict] = []
    act, state = g.reward_arrays(reward)
    # targets are absorbing: nothing is collected there
    base_rewards = {reward: ([np.zeros_like(a) if target[s] else a for s, a in enumerate(act)],
                             np.where(target, 0.0, state))}
    gr = g.with_rewards(base_rewards)

    def make_step(game):
        def step(vals):
            new = one_step(game, vals, opt, reward, active)
            new[target] = 0.0
            new[inf] = np.inf
            return new
        return step

    iters, converged = 0, True
    if active.any() and opt == "min":
        total = [a + base_rewards[reward][1][s] for s, a in enumerate(base_rewards[reward][0])]
        nz = np.concatenate([np.abs(t[t != 0]) for s, t in enumerate(total) if active[s]] + [np.zeros(0)])
        gam = gamma if gamma is not None else (float(nz.mean()) if nz.size else 1.0)
        # r_A + r_S folded into the action part, zeros lifted to gamma
        lifted = {reward: ([np.where(t == 0, gam, t) if active[s] else t for s, t in enumerate(total)],
                           np.zeros(g.n))}
        v, it1, _ = _iterate(g, v, make_step(g.with_rewards(lifted)), active, eps, max_iters,
                             g.state_names, [])
        iters += it1
    if active.any():
        v, it2, converged = _iterate(g, v, make_step(gr), active, eps, max_iters, g.state_names, diagnostics)
        iters += it2
    v[~inf & ~target & ~live] = np.nan
    strategy = one_step_strategies(gr, v, opt, reward, states=live) if synth else None
    return ZsResult(v, strategy, iterations=iters, converged=converged, diagnostics=diagnostics)


def zs_solve(g: CoalitionGame, obj, opt: str = "max", **kw) -> ZsResult:
    """Dispatch on the objective kind."""
    if isinstance(obj, UntilObj) and obj.bound is None:
        kw.pop("gamma", None)
        return zs_until(g, obj.sat1, obj.sat2, opt, **kw)
    if isinstance(obj, ReachRewObj):
        return zs_reach_reward(g, obj.reward, obj.target, opt, **kw)
    # backward induction is bounded by the horizon; every state is kept
    return zs_finite(g, obj, opt, synth=kw.get("synth", False))
