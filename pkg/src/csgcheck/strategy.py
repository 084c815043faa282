"""Strategy profiles: assembly, exact evaluation, certification and export.

A profile node is ``(state, memory, step)``. Memory is ``main`` while the
players follow the per-state matrix or bimatrix solutions, ``switched1`` /
``switched2`` after switching to the cooperative MDP strategy for objective
1 / 2, once the other objective is settled. ``step`` counts elapsed steps
for finite horizons and stays 0 otherwise.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .game import CoalitionGame, Mdp, induced_chain
from .mdp import mdp_solve
from .objectives import CumulObj, InstObj, NextObj, ReachRewObj, UntilObj, horizon

MAIN = "main"
SWITCHED = ("switched1", "switched2")


@dataclass
class Entry:
    x: np.ndarray
    y: np.ndarray
    provenance: str


@dataclass
class StrategyProfile:
    """Choices of both players of a coalition game at every profile node.

    ``mode_after[(state, step)]`` gives the memory a ``main`` node turns into
    on entering ``state`` at ``step``; missing keys mean staying in ``main``.
    ``cap`` is the last step index kept (0 for memoryless-in-time profiles).
    """
    game: CoalitionGame
    entries: dict[tuple, Entry] = field(default_factory=dict)
    mode_after: dict[tuple, str] = field(default_factory=dict)
    cap: int = 0

    def initial_node(self, s: int) -> tuple:
        mode = self.mode_after.get((s, 0), MAIN)
        return (s, MAIN if mode == "settled" else mode, 0)

    def successor(self, node: tuple, t: int) -> tuple:
        _, mode, step = node
        nxt = min(step + 1, self.cap)
        entering = self.mode_after.get((t, nxt), MAIN)
        if mode == MAIN or entering == "settled":
            mode = entering
        return (t, MAIN if mode == "settled" else mode, nxt)

    def distributions(self, node: tuple):
        e = self.entries.get(node)
        if e is None:
            l, m = self.game.shape(node[0])
            x = np.zeros(l)
            y = np.zeros(m)
            x[0] = y[0] = 1.0
            return x, y
        return e.x, e.y

    def nodes(self, starts=None) -> list[tuple]:
        """Nodes reachable under any actions from the given (default: all) start nodes."""
        g = self.game
        if starts is None:
            starts = [self.initial_node(s) for s in range(g.n)]
        seen = set(starts)
        queue = deque(starts)
        order = []
        while queue:
            node = queue.popleft()
            order.append(node)
            live = g.probs[node[0]].reshape(-1, len(g.succ[node[0]])).max(axis=0) > 0
            for t in g.succ[node[0]][live]:
                nxt = self.successor(node, int(t))
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return order


def _first(n: int) -> np.ndarray:
    v = np.zeros(n)
    v[0] = 1.0
    return v


def _pure(g: CoalitionGame, s: int, row: int):
    l, m = g.shape(s)
    x = np.zeros(l)
    y = np.zeros(m)
    x[row // m] = 1.0
    y[row % m] = 1.0
    return x, y


# --- assembly ------------------------------------------------------------

def assemble_zero_sum(g: CoalitionGame, res, obj) -> StrategyProfile:
    """Profile from a zero-sum result computed with ``synth=True``."""
    k = horizon(obj)
    prof = StrategyProfile(g, cap=k or 0)
    if res.layer_strategy is not None and k is not None and not isinstance(obj, ReachRewObj):
        for t in range(k):
            for s, (x, y) in res.layer_strategy[k - t].items():
                prof.entries[(s, MAIN, t)] = Entry(x, y, "matrix-LP")
        return prof
    if res.strategy is None:
        raise ValueError("zero-sum result carries no strategy; solve with synth=True")
    for s, (x, y) in res.strategy.items():
        prof.entries[(s, MAIN, 0)] = Entry(x, y, "matrix-LP")
    return prof


def _mode_for(decided: tuple[bool, bool]) -> str:
    d1, d2 = decided
    if d1 and d2:
        return "settled"
    if d1:
        return SWITCHED[1]
    if d2:
        return SWITCHED[0]
    return MAIN


def assemble_nonzero(g: CoalitionGame, res) -> StrategyProfile:
    """Profile from a nonzero-sum result computed with ``synth=True``.

    Bimatrix equilibria are used while both objectives are open; the MDP
    optimum of the open objective takes over once the other one settles.
    """
    finite = res.horizon is not None
    if finite:
        k = res.horizon
        n1, n2 = res.offsets
        kmax = k + max(n1, n2)
        prof = StrategyProfile(g, cap=kmax)
        for (s, n), dec in res.decided.items():
            prof.mode_after[(s, k - n)] = _mode_for(dec)
        # past the common horizon only the longer objective is open
        for t in range(k + 1, kmax + 1):
            for s in range(g.n):
                prof.mode_after[(s, t)] = SWITCHED[0] if n1 > n2 else SWITCHED[1]
    else:
        prof = StrategyProfile(g, cap=0)
        for s, dec in res.decided.items():
            prof.mode_after[(s, 0)] = _mode_for(dec)
    for node in prof.nodes():
        s, mode, t = node
        if mode == MAIN:
            key = (s, res.horizon - t) if finite else s
            if key in res.main:
                x, y = res.main[key]
                prof.entries[node] = Entry(x, y, "bimatrix-NE")
            else:
                l, m = g.shape(s)
                prof.entries[node] = Entry(_first(l), _first(m), "settled")
            continue
        i = SWITCHED.index(mode)
        sol = res.mdp[i]
        if finite:
            remaining = (res.horizon + res.offsets[i]) - t
            if remaining <= 0:
                l, m = g.shape(s)
                prof.entries[node] = Entry(_first(l), _first(m), "settled")
                continue
            row = int(sol.layer_strategy[remaining][s])
        else:
            row = int(sol.strategy[s])
        x, y = _pure(g, s, row)
        prof.entries[node] = Entry(x, y, "mdp-opt")
    return prof


def assemble(check_result) -> StrategyProfile:
    """Profile for the top-level operator of a checked property."""
    res, g = check_result.engine, check_result.game
    if check_result.objectives is not None and len(check_result.objectives) == 2:
        if res.augmented is not None:
            g = res.augmented.game
        return assemble_nonzero(g, res)
    return assemble_zero_sum(g, res, check_result.objectives[0])


# --- exact evaluation ----------------------------------------------------

def _node_sets(nodes, mask):
    return np.array([bool(mask[n[0]]) for n in nodes])


def _can_reach(P: sp.csr_matrix, target: np.ndarray, allowed: np.ndarray) -> np.ndarray:
    R = target.copy()
    E = (P > 0).astype(np.int8)
    frontier = target.copy()
    while frontier.any():
        pre = (E @ frontier.astype(np.int8)) > 0
        new = pre & allowed & ~R
        R |= new
        frontier = new
    return R


def _solve(P: sp.csr_matrix, idx: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if idx.size == 0:
        return np.zeros(0)
    A = sp.identity(idx.size, format="csc") - P[idx][:, idx].tocsc()
    return splu(A).solve(rhs)


def _node_rewards(g: CoalitionGame, profile, nodes, reward: str) -> np.ndarray:
    act, state = g.reward_arrays(reward)
    out = np.zeros(len(nodes))
    for k, node in enumerate(nodes):
        x, y = profile.distributions(node)
        out[k] = state[node[0]] + x @ act[node[0]] @ y
    return out


def chain_values(g: CoalitionGame, chain, profile, obj) -> np.ndarray:
    """Expected value of ``obj`` from every node of ``chain`` (exact)."""
    nodes, P = chain.nodes, chain.P
    if isinstance(obj, NextObj):
        return P @ _node_sets(nodes, obj.sat).astype(float)
    if isinstance(obj, UntilObj):
        s1, s2 = _node_sets(nodes, obj.sat1), _node_sets(nodes, obj.sat2)
        if obj.bound is not None:
            w = s2.astype(float)
            for _ in range(obj.bound):
                w = np.where(s2, 1.0, np.where(s1, P @ w, 0.0))
            return w
        maybe = _can_reach(P, s2, s1 & ~s2) & ~s2
        v = s2.astype(float)
        idx = np.flatnonzero(maybe)
        rhs = P[idx][:, np.flatnonzero(s2)] @ np.ones(int(s2.sum()))
        v[idx] = _solve(P, idx, rhs)
        return v
    if isinstance(obj, InstObj):
        w = g.reward_arrays(obj.reward)[1][[n[0] for n in nodes]].astype(float)
        for _ in range(obj.k):
            w = P @ w
        return w
    if isinstance(obj, CumulObj):
        rew = _node_rewards(g, profile, nodes, obj.reward)
        w = np.zeros(len(nodes))
        for _ in range(obj.k):
            w = rew + P @ w
        return w
    if isinstance(obj, ReachRewObj):
        tgt = _node_sets(nodes, obj.target)
        miss = ~_can_reach(P, tgt, ~tgt)
        # nodes that can reach a node unable to reach the target get infinity
        inf = _can_reach(P, miss, ~tgt) & ~tgt
        v = np.zeros(len(nodes))
        v[inf] = np.inf
        idx = np.flatnonzero(~inf & ~tgt)
        rew = _node_rewards(g, profile, nodes, obj.reward)
        v[idx] = _solve(P, idx, rew[idx])
        return v
    raise TypeError(f"unsupported objective {obj!r}")


def evaluate_profile(g: CoalitionGame, objectives, profile: StrategyProfile) -> np.ndarray:
    """Values ``(n, len(objectives))`` achieved from each state's start node."""
    starts = [profile.initial_node(s) for s in range(g.n)]
    chain = induced_chain(g, profile, starts)
    out = np.zeros((g.n, len(objectives)))
    for i, obj in enumerate(objectives):
        vals = chain_values(g, chain, profile, obj)
        for s, node in enumerate(starts):
            out[s, i] = vals[chain.index[node]]
    return out


# --- best responses and certificates -------------------------------------

def best_response_mdp(g: CoalitionGame, profile: StrategyProfile, player: int):
    """MDP over profile nodes where ``player`` (0 or 1) picks freely."""
    nodes = profile.nodes()
    index = {n: k for k, n in enumerate(nodes)}
    queue = deque(nodes)
    seen = set(nodes)
    while queue:
        node = queue.popleft()
        for t in g.succ[node[0]]:
            nxt = profile.successor(node, int(t))
            if nxt not in seen:
                seen.add(nxt)
                index[nxt] = len(nodes)
                nodes.append(nxt)
                queue.append(nxt)
    succ, probs, rewards = [], [], {name: ([], np.zeros(len(nodes))) for name in g.rewards}
    for node in nodes:
        s = node[0]
        x, y = profile.distributions(node)
        P = g.probs[s]
        if player == 0:
            rows = np.einsum("ijk,j->ik", P, y)
        else:
            rows = np.einsum("ijk,i->jk", P, x)
        targets = [index[profile.successor(node, int(t))] for t in g.succ[s]]
        uniq = sorted(set(targets))
        M = np.zeros((rows.shape[0], len(uniq)))
        for c, t in enumerate(targets):
            M[:, uniq.index(t)] += rows[:, c]
        succ.append(np.array(uniq, dtype=np.intp))
        probs.append(M)
        for name, (act, st) in g.rewards.items():
            a = act[s] @ y if player == 0 else x @ act[s]
            rewards[name][0].append(a)
            rewards[name][1][index[node]] = st[s]
    return Mdp(succ, probs, rewards=rewards), nodes, index


def _lift(obj, nodes):
    if isinstance(obj, NextObj):
        return NextObj(_node_sets(nodes, obj.sat))
    if isinstance(obj, UntilObj):
        return UntilObj(_node_sets(nodes, obj.sat1), _node_sets(nodes, obj.sat2), obj.bound)
    if isinstance(obj, ReachRewObj):
        return ReachRewObj(obj.reward, _node_sets(nodes, obj.target))
    return obj


def best_response_values(g, profile, obj, player: int, opt: str, eps: float = 1e-12):
    """Optimal value of ``obj`` for ``player`` against the fixed other side."""
    m, nodes, index = best_response_mdp(g, profile, player)
    res = mdp_solve(m, opt, _lift(obj, nodes), eps=eps)
    return res.values, nodes, index


@dataclass
class EpsilonCertificate:
    epsilon: float
    per_player: tuple[float, float]
    worst: tuple | None = None


def certify_epsilon(g: CoalitionGame, objectives, profile: StrategyProfile, opt: str = "max",
                    eps: float = 1e-12) -> EpsilonCertificate:
    """Largest gain any single player gets by deviating.

    Unbounded objectives are checked from every profile node, finite-horizon
    ones only from the start nodes, where the step counter matches the
    horizon the objective was solved for. Nodes where an objective was
    already decided on the way in are skipped for it. Best responses come from an MDP
    solved at high precision, achieved values from exact linear solves on
    the induced chain. ``opt="min"`` treats the
    objectives as costs.
    """
    gaps, worst, worst_gap = [], None, 0.0
    for i, obj in enumerate(objectives):
        br, nodes, index = best_response_values(g, profile, obj, i, opt, eps)
        chain = induced_chain(g, profile, nodes)
        got = chain_values(g, chain, profile, obj)
        achieved = np.array([got[chain.index[n]] for n in nodes])
        with np.errstate(invalid="ignore"):
            gap = br - achieved if opt == "max" else achieved - br
        gap = np.where(np.isnan(gap), 0.0, gap)
        if horizon(obj) is not None:
            gap = np.where([n[2] == 0 for n in nodes], gap, 0.0)
        # in the other objective's switched mode this one was settled on entry
        gap = np.where([n[1] == SWITCHED[1 - i] for n in nodes], 0.0, gap)
        k = int(np.argmax(gap)) if gap.size else 0
        g_i = max(0.0, float(gap.max(initial=0.0)))
        gaps.append(g_i)
        if g_i > worst_gap:
            worst_gap, worst = g_i, (i + 1, nodes[k])
    return EpsilonCertificate(max(gaps), tuple(gaps), worst)


# --- export --------------------------------------------------------------

def _action_name(side: tuple, act: tuple) -> str:
    return ",".join(side) + "=" + ",".join(act)


def _node_name(g, node, with_step: bool) -> str:
    s, mode, t = node
    name = f"{g.state_names[s]}/{mode}"
    return f"{name}/{t}" if with_step else name


def export_table(profile: StrategyProfile) -> str:
    g = profile.game
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state", "memory", "step", "action", "prob"])
    for (s, mode, t), e in sorted(profile.entries.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        for side, names, dist in ((g.coalitions[0], g.rows[s], e.x), (g.coalitions[1], g.cols[s], e.y)):
            for a, p in zip(names, dist):
                if p > 0:
                    w.writerow([g.state_names[s], mode, t, _action_name(side, a), repr(float(p))])
    return buf.getvalue()


def parse_table(text: str) -> dict[tuple[str, str, int], dict[str, float]]:
    """Read a table export back as ``{(state, memory, step): {action: prob}}``."""
    out: dict = {}
    rows = csv.DictReader(io.StringIO(text))
    for row in rows:
        key = (row["state"], row["memory"], int(row["step"]))
        out.setdefault(key, {})[row["action"]] = float(row["prob"])
    return out


def _fmt(p: float) -> str:
    from fractions import Fraction
    f = Fraction(p).limit_denominator(1000)
    if abs(float(f) - p) < 1e-9:
        return str(f)
    return f"{p:.6g}"


def export_graph(profile: StrategyProfile, starts=None) -> str:
    """Digraph of the profile's reachable nodes.

    Node labels list each side's ``action:probability`` choices, edges the
    transition probabilities of the induced chain.
    """
    g = profile.game
    if starts is None:
        starts = [profile.initial_node(s) for s in g.initial]
    chain = induced_chain(g, profile, starts)
    with_step = profile.cap > 0
    lines = ["digraph strategy {", "  node [shape=box];"]
    for k, node in enumerate(chain.nodes):
        x, y = profile.distributions(node)
        s = node[0]
        parts = []
        for side, names, dist in ((g.coalitions[0], g.rows[s], x), (g.coalitions[1], g.cols[s], y)):
            acts = " ".join(f"{','.join(a)}:{_fmt(p)}" for a, p in zip(names, dist) if p > 0)
            parts.append(f"{','.join(side)}: {acts}")
        label = _node_name(g, node, with_step) + "\\n" + "\\n".join(parts)
        lines.append(f'  n{k} [label="{label}"];')
    P = chain.P.tocoo()
    for i, j, p in sorted(zip(P.row, P.col, P.data)):
        lines.append(f'  n{i} -> n{j} [label="{_fmt(p)}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_profile(profile: StrategyProfile, fmt: str = "graph") -> str:
    if fmt == "graph":
        return export_graph(profile)
    if fmt == "table":
        return export_table(profile)
    raise ValueError(f"unknown export format {fmt!r}")
