"""Social-welfare (and social-cost) equilibrium values of coalition games.

Each state and step solves a bimatrix game built from the successor values.
Once one player's objective can no longer change at a state, that player is
indifferent and the other one's best is the cooperative MDP optimum, so the
pair there is read off an MDP solution instead.

Finite-horizon pairs are handled by one backward induction over
``n = 0..min(k1, k2)`` with each objective's remaining bound offset by
``k_i - min(k1, k2)``. Unbounded pairs use value iteration whose
convergence is judged on the sum of the two values. Mixed pairs go through
a step-counter product game (:func:`augment`).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bimatrix import scne, swne
from .game import CoalitionGame, induced_mdp
from .mdp import EPS_VI, MAX_ITERS, mdp_solve, rel_diff
from .objectives import CumulObj, InstObj, NextObj, ReachRewObj, UntilObj, horizon
from .zerosum import CYCLE_START, CYCLE_TOL, CYCLE_WINDOW, find_cycle, cycle_report


class NonzeroError(ValueError):
    pass


@dataclass
class NzResult:
    """Equilibrium value pairs plus what a profile needs.

    ``main[key] = (x, y)`` holds bimatrix equilibria, keyed by state for
    unbounded pairs and by ``(state, level)`` for finite ones, where
    ``level`` counts the remaining common steps. ``decided[key]`` says which
    objectives are settled there. ``mdp[i]`` is the cooperative MDP
    solution for objective ``i``, followed after a switch.
    """
    values: np.ndarray                       # (n, 2)
    opt: str
    objectives: tuple
    main: dict = field(default_factory=dict)
    decided: dict = field(default_factory=dict)
    mdp: tuple = (None, None)
    horizon: int | None = None
    offsets: tuple[int, int] = (0, 0)
    iterations: int = 0
    converged: bool = True
    diagnostics: list[dict] = field(default_factory=list)
    epsilon: float | None = None
    augmented: "AugmentedGame | None" = None
    product_values: np.ndarray | None = None

    @property
    def sums(self) -> np.ndarray:
        return self.values.sum(axis=1)


# --- per-objective bookkeeping -------------------------------------------

class _Track:
    """How one objective behaves inside the pair recursion."""

    def __init__(self, g: CoalitionGame, m, obj, opt: str, eps: float, max_iters: int, gamma=None):
        self.obj = obj
        self.n = g.n
        self.reward = obj.reward if isinstance(obj, (CumulObj, ReachRewObj)) else None
        kw = {"eps": eps, "max_iters": max_iters}
        if isinstance(obj, ReachRewObj):
            kw["gamma"] = gamma
        self.mdp = mdp_solve(m, opt, obj, **kw)
        if isinstance(obj, InstObj):
            self.base = g.reward_arrays(obj.reward)[1].astype(float)
        elif isinstance(obj, NextObj):
            self.base = obj.sat.astype(float)
        elif isinstance(obj, UntilObj):
            self.base = obj.sat2.astype(float)
        else:
            self.base = np.zeros(g.n)

    def decided(self, remaining: int | None):
        """Mask of settled states and their values with ``remaining`` steps left."""
        obj = self.obj
        if remaining == 0:
            return np.ones(self.n, dtype=bool), self.base.copy()
        if isinstance(obj, UntilObj):
            mask = obj.sat2 | ~obj.sat1
            return mask, obj.sat2.astype(float)
        if isinstance(obj, ReachRewObj):
            return obj.target.copy(), np.zeros(self.n)
        return np.zeros(self.n, dtype=bool), np.zeros(self.n)

    def mdp_value(self, remaining: int | None) -> np.ndarray:
        if remaining is None:
            return self.mdp.values
        return self.mdp.layers[remaining]


# --- bimatrix solving ----------------------------------------------------

def _column_game(A: np.ndarray, B: np.ndarray, opt: str):
    """Games where only the row player really chooses (one column)."""
    sign = 1.0 if opt == "max" else -1.0
    a, b = sign * A[:, 0], sign * B[:, 0]
    best = a.max()
    cand = np.flatnonzero(a >= best - 1e-12 * max(1.0, abs(best)))
    i = cand[np.argmax(b[cand])]
    x = np.zeros(A.shape[0])
    x[i] = 1.0
    return float(A[i, 0]), float(B[i, 0]), x, np.ones(1)


def solve_bimatrix(A: np.ndarray, B: np.ndarray, opt: str):
    """``(u, v, x, y)`` of the SWNE (``max``) or SCNE (``min``) of ``(A, B)``."""
    if not (np.isfinite(A).all() and np.isfinite(B).all()):
        raise NonzeroError("infinite expected reward inside an equilibrium computation; "
                           "the targets are not reached almost surely under every profile")
    if A.shape[1] == 1:
        return _column_game(A, B, opt)
    if A.shape[0] == 1:
        v, u, y, x = _column_game(B.T, A.T, opt)
        return u, v, x, y
    e = swne(A, B) if opt == "max" else scne(A, B)
    return e.u, e.v, e.x, e.y


class _Solver:
    def __init__(self, workers: int = 1):
        self.pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def map(self, A, B, opt):
        args = [(A[k], B[k], opt) for k in range(len(A))]
        if self.pool is None:
            return [solve_bimatrix(*a) for a in args]
        return list(self.pool.map(lambda a: solve_bimatrix(*a), args))

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _pair_matrices(g: CoalitionGame, b, V: np.ndarray, tracks):
    vs = V[b.succ]                                              # (nb, k, 2)
    out = []
    for i, tr in enumerate(tracks):
        Z = np.einsum("bijk,bk->bij", b.probs, vs[..., i])
        if tr.reward is not None:
            Z = Z + g.block_rewards(tr.reward, b)
        out.append(Z)
    return out


def _sweep(g, V, tracks, opt, open_, solver, record):
    """One bimatrix solve per state in ``open_`` against successor pairs ``V``."""
    out = np.zeros((g.n, 2))
    for b in g.blocks():
        sel = open_[b.states]
        if not sel.any():
            continue
        Z1, Z2 = _pair_matrices(g, b, V, tracks)
        states = b.states[sel]
        res = solver.map(Z1[sel], Z2[sel], opt)
        for s, (u, v, x, y) in zip(states, res):
            out[s] = (u, v)
            if record is not None:
                record[int(s)] = (x, y)
    return out


def _fill_decided(tracks, d1, val1, d2, val2, r1, r2, literal_zero=False):
    """Pairs for states where at least one objective is settled."""
    n = len(d1)
    V = np.zeros((n, 2))
    both = d1 & d2
    V[both, 0] = val1[both]
    V[both, 1] = val2[both]
    only1 = d1 & ~d2
    only2 = d2 & ~d1
    if not literal_zero:
        V[only1, 0] = val1[only1]
        V[only1, 1] = tracks[1].mdp_value(r2)[only1]
        V[only2, 0] = tracks[0].mdp_value(r1)[only2]
        V[only2, 1] = val2[only2]
    return V


# --- finite horizon ------------------------------------------------------

def nz_finite(g: CoalitionGame, obj1, obj2, opt: str = "max", eps: float = EPS_VI,
              max_iters: int = MAX_ITERS, workers: int = 1, synth: bool = False) -> NzResult:
    """Backward induction for two finite-horizon objectives."""
    k1, k2 = horizon(obj1), horizon(obj2)
    if k1 is None or k2 is None:
        raise NonzeroError("nz_finite needs two finite-horizon objectives")
    m = induced_mdp(g)
    tracks = (_Track(g, m, obj1, opt, eps, max_iters), _Track(g, m, obj2, opt, eps, max_iters))
    k = min(k1, k2)
    n1, n2 = k1 - k, k2 - k
    res = NzResult(np.zeros((g.n, 2)), opt, (obj1, obj2), horizon=k, offsets=(n1, n2),
                   mdp=(tracks[0].mdp, tracks[1].mdp), iterations=k)
    solver = _Solver(workers)
    try:
        V = None
        for n in range(k + 1):
            r1, r2 = n + n1, n + n2
            d1, val1 = tracks[0].decided(r1)
            d2, val2 = tracks[1].decided(r2)
            new = _fill_decided(tracks, d1, val1, d2, val2, r1, r2)
            open_ = ~(d1 | d2)
            if n > 0 and open_.any():
                record = {} if synth else None
                new[open_] = _sweep(g, V, tracks, opt, open_, solver, record)[open_]
                if synth:
                    res.main.update({(s, n): xy for s, xy in record.items()})
            for s in range(g.n):
                res.decided[(s, n)] = (bool(d1[s]), bool(d2[s]))
            V = new
    finally:
        solver.close()
    res.values = V
    return res


# --- infinite horizon ----------------------------------------------------

def _pair_cycle_report(history, period, names, iteration):
    H = np.array(history[-period:])                 # (p, n, 2)
    amp = (H.max(axis=0) - H.min(axis=0)).max(axis=1)
    moving = np.flatnonzero(amp > CYCLE_TOL)
    return {
        "kind": "pair-oscillation",
        "iteration": iteration,
        "period": period,
        "amplitude": float(amp.max(initial=0.0)),
        "states": {names[s]: [[float(a), float(b)] for a, b in H[:, s]] for s in moving},
        "message": "the value sum converged but the individual values keep cycling",
    }


def nz_infinite(g: CoalitionGame, obj1, obj2, opt: str = "max", eps: float = EPS_VI,
                max_iters: int = MAX_ITERS, gamma: float | None = None, workers: int = 1,
                synth: bool = False, reachable_only: bool = False) -> NzResult:
    """Value iteration for two unbounded objectives (until or expected reachability)."""
    for o in (obj1, obj2):
        if horizon(o) is not None:
            raise NonzeroError("nz_infinite needs two unbounded objectives")
    m = induced_mdp(g)
    tracks = (_Track(g, m, obj1, opt, eps, max_iters, gamma), _Track(g, m, obj2, opt, eps, max_iters, gamma))
    d1, val1 = tracks[0].decided(None)
    d2, val2 = tracks[1].decided(None)
    fixed = _fill_decided(tracks, d1, val1, d2, val2, None, None)
    rewards = any(isinstance(o, ReachRewObj) for o in (obj1, obj2))
    # reward pairs start from (0, 0) everywhere but the common targets
    V = _fill_decided(tracks, d1, val1, d2, val2, None, None, literal_zero=rewards)
    skipped = ~(d1 | d2) & ~g.reachable if reachable_only else np.zeros(g.n, dtype=bool)
    open_ = ~(d1 | d2) & ~skipped
    res = NzResult(V, opt, (obj1, obj2), mdp=(tracks[0].mdp, tracks[1].mdp))
    for s in range(g.n):
        res.decided[s] = (bool(d1[s]), bool(d2[s]))
    solver = _Solver(workers)
    record: dict = {}
    sums: list[np.ndarray] = []
    it, converged = 0, False
    try:
        while it < max_iters:
            it += 1
            new = fixed.copy()
            if open_.any():
                record = {}
                new[open_] = _sweep(g, V, tracks, opt, open_, solver, record)[open_]
            done = rel_diff(new.sum(axis=1), V.sum(axis=1)) < eps
            prev, V = V, new
            if done:
                converged = True
                break
            if it >= CYCLE_START - CYCLE_WINDOW:
                sums.append(V.sum(axis=1))
                if len(sums) > CYCLE_WINDOW:
                    sums.pop(0)
                if it >= CYCLE_START:
                    p = find_cycle(sums)
                    if p is not None:
                        rep = cycle_report(sums, p, g.state_names, it, what="value sums")
                        res.diagnostics.append(rep)
                        break
        else:
            res.diagnostics.append({"kind": "iteration-limit", "iteration": it,
                                    "message": f"no convergence within {max_iters} iterations"})
        if converged and open_.any() and rel_diff(V.ravel(), prev.ravel()) >= eps:
            # sum settled while the pair still moves: look for a cycle
            hist = [prev, V]
            W = V
            for _ in range(CYCLE_WINDOW):
                W2 = fixed.copy()
                W2[open_] = _sweep(g, W, tracks, opt, open_, solver, None)[open_]
                W = W2
                hist.append(W)
            flat = [h.reshape(-1) for h in hist]
            p = find_cycle(flat)
            if p is not None:
                res.diagnostics.append(_pair_cycle_report(hist, p, g.state_names, it))
            else:
                res.diagnostics.append({"kind": "pair-unsettled", "iteration": it,
                                        "message": "the value sum converged but the individual values still change"})
    finally:
        solver.close()
    V[skipped] = np.nan
    res.values = V
    res.iterations = it
    res.converged = converged
    if synth:
        res.main = record
    return res


# --- mixed horizons ------------------------------------------------------

@dataclass
class AugmentedGame:
    """Step-counter product: state ``(s, n)`` has index ``n * |S| + s``."""
    game: CoalitionGame
    objectives: tuple
    cap: int
    base_states: int

    def index(self, s: int, n: int = 0) -> int:
        return n * self.base_states + s

    def layer(self, values: np.ndarray, n: int = 0) -> np.ndarray:
        return values[n * self.base_states:(n + 1) * self.base_states]


def _counter_cap(obj) -> int:
    if isinstance(obj, NextObj):
        return 2
    if isinstance(obj, (UntilObj, InstObj)):
        return obj.bound + 1 if isinstance(obj, UntilObj) else obj.k + 1
    if isinstance(obj, CumulObj):
        return obj.k
    raise NonzeroError(f"unsupported finite objective {obj!r}")


def augment(g: CoalitionGame, obj1, obj2) -> AugmentedGame:
    """Turn one finite-horizon objective into an unbounded one on a product.

    The counter ``n`` advances with every step until it reaches the cap and
    then stays there. Exactly one of the two objectives must be finite.
    """
    f1, f2 = horizon(obj1) is not None, horizon(obj2) is not None
    if f1 == f2:
        raise NonzeroError("augment needs exactly one finite-horizon objective")
    if f2:
        aug = augment(g.swapped(), obj2, obj1)
        sw = aug.game.swapped()
        return AugmentedGame(sw, (aug.objectives[1], aug.objectives[0]), aug.cap, aug.base_states)
    S = g.n
    cap = _counter_cap(obj1)
    L = cap + 1
    n_of = np.repeat(np.arange(L), S)
    s_of = np.tile(np.arange(S), L)

    rows, cols, succ, probs, labels = [], [], [], [], []
    for idx in range(S * L):
        s, n = s_of[idx], n_of[idx]
        nxt = min(n + 1, cap)
        rows.append(g.rows[s])
        cols.append(g.cols[s])
        succ.append(g.succ[s] + nxt * S)
        probs.append(g.probs[s])
        labels.append(set(g.labels[s]))

    def lift(mask):
        return np.tile(mask, L)

    def act_rewards(name, keep):
        act, st = g.reward_arrays(name)
        return ([act[s_of[i]] if keep[i] else np.zeros_like(act[s_of[i]]) for i in range(S * L)],
                np.where(keep, st[s_of], 0.0))

    rewards = {name: ([g.rewards[name][0][s_of[i]] for i in range(S * L)], g.rewards[name][1][s_of])
               for name in g.rewards}

    if isinstance(obj1, NextObj):
        a = lift(obj1.sat) & (n_of == 1)
        new1 = UntilObj(np.ones(S * L, dtype=bool), a)
        tag = {"a_next": a}
    elif isinstance(obj1, UntilObj):
        live = n_of <= obj1.bound
        a1, a2 = lift(obj1.sat1) & live, lift(obj1.sat2) & live
        new1 = UntilObj(a1, a2)
        tag = {"a_left1": a1, "a_right1": a2}
    elif isinstance(obj1, InstObj):
        name = obj1.reward + "'"
        act, st = g.reward_arrays(obj1.reward)
        at_k = n_of == obj1.k
        rewards[name] = ([np.zeros_like(act[s_of[i]]) for i in range(S * L)], np.where(at_k, st[s_of], 0.0))
        target = n_of == obj1.k + 1
        new1 = ReachRewObj(name, target)
        tag = {"a_k+1": target}
    else:
        name = obj1.reward + "'"
        rewards[name] = act_rewards(obj1.reward, n_of < obj1.k)
        target = n_of == obj1.k
        new1 = ReachRewObj(name, target)
        tag = {"a_k": target}

    if isinstance(obj2, UntilObj):
        new2 = UntilObj(lift(obj2.sat1), lift(obj2.sat2))
        tag.update({"a_left2": new2.sat1, "a_right2": new2.sat2})
    else:
        new2 = ReachRewObj(obj2.reward, lift(obj2.target))
        tag["a_target2"] = new2.target
    for atom, mask in tag.items():
        for i in np.flatnonzero(mask):
            labels[i].add(atom)

    names = [f"({g.state_names[s_of[i]]},{n_of[i]})" for i in range(S * L)]
    # every counter-0 copy is a start state: values are read off all of them
    G = CoalitionGame(rows, cols, succ, probs, labels, list(range(S)), rewards, names,
                      coalitions=g.coalitions)
    G.initial = list(g.initial)
    return AugmentedGame(G, (new1, new2), cap, S)


def nz_solve(g: CoalitionGame, obj1, obj2, opt: str = "max", **kw) -> NzResult:
    """Dispatch on the horizons of the two objectives.

    Mixed pairs are solved on the counter product; the returned values are
    those of the counter-0 copies, and ``aug`` is attached for synthesis.
    """
    f1, f2 = horizon(obj1) is not None, horizon(obj2) is not None
    if f1 and f2:
        kw.pop("gamma", None)
        kw.pop("reachable_only", None)
        return nz_finite(g, obj1, obj2, opt, **kw)
    if not f1 and not f2:
        return nz_infinite(g, obj1, obj2, opt, **kw)
    aug = augment(g, obj1, obj2)
    res = nz_infinite(aug.game, *aug.objectives, opt, **kw)
    res.augmented = aug
    res.product_values = res.values
    res.values = aug.layer(res.values, 0)
    return res
