"""Concurrent stochastic games, the two-coalition reduction and MDP/chain views."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .modelfile import DIST_TOL, IDLE, ModelError, ModelSpec


class CsgError(ValueError):
    pass


@dataclass
class RewardStructure:
    """``state[s]`` is r_S(s); ``action[s]`` maps joint actions to r_A(s, a)."""
    state: np.ndarray
    action: list[dict[tuple[int, ...], float]]

    def act(self, s: int, joint: tuple[int, ...]) -> float:
        return self.action[s].get(joint, 0.0)


class Csg:
    """An n-player concurrent stochastic game.

    Actions are indexed per player; ``-1`` encodes the idle action inside
    joint-action tuples. ``trans[s][joint]`` is a ``(successors, probs)``
    pair and exists exactly for the joint actions built from the available
    sets at ``s``.
    """

    def __init__(self, players: Sequence[str], actions: Sequence[Sequence[str]], state_names: Sequence[str],
                 initial: Iterable[int], labels: Sequence[Iterable[str]],
                 trans: Sequence[dict[tuple[int, ...], dict[int, float]]],
                 rewards: dict[str, RewardStructure] | None = None, atoms: Iterable[str] = ()):
        self.players = list(players)
        self.actions = [list(a) for a in actions]
        self.state_names = [str(s) for s in state_names]
        self.n = len(self.state_names)
        self.initial = sorted(set(initial))
        self.labels = [frozenset(l) for l in labels]
        self.atoms = frozenset(atoms) | frozenset().union(*self.labels)
        self.rewards = dict(rewards or {})
        if not self.players:
            raise CsgError("at least one player required")
        seen = {}
        for i, acts in enumerate(self.actions):
            for a in acts:
                if a == IDLE or a in seen:
                    raise CsgError(f"action name {a!r} is not unique across players")
                seen[a] = i
        self.trans: list[dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]]] = []
        self.available: list[tuple[tuple[int, ...], ...]] = []
        for s, table in enumerate(trans):
            if not table:
                raise CsgError(f"state {self.state_names[s]} has no transitions")
            avail = []
            for i in range(len(self.players)):
                used = sorted({j[i] for j in table})
                if -1 in used and len(used) > 1:
                    raise CsgError(f"player {self.players[i]} is both idle and active at state {self.state_names[s]}")
                avail.append(() if used == [-1] else tuple(used))
            self.available.append(tuple(avail))
            expected = set(product(*[a if a else (-1,) for a in avail]))
            missing = expected - set(table)
            if missing:
                j = min(missing)
                raise CsgError(f"missing transition for {self.joint_name(j)} at state {self.state_names[s]}")
            row = {}
            for joint, dist in table.items():
                succ = np.array(sorted(dist), dtype=np.intp)
                if succ.size and (succ.min() < 0 or succ.max() >= self.n):
                    raise CsgError(f"dangling state index in transition at state {self.state_names[s]}")
                p = np.array([dist[t] for t in succ], dtype=float)
                total = p.sum()
                if (p < 0).any() or abs(total - 1.0) > DIST_TOL:
                    raise CsgError(f"distribution sums to {total:.12g} at state {self.state_names[s]} "
                                   f"for {self.joint_name(joint)}")
                row[joint] = (succ, p / total)
            self.trans.append(row)
        if len(self.trans) != self.n or len(self.labels) != self.n:
            raise CsgError("state count mismatch between labels and transitions")
        for name, r in self.rewards.items():
            if len(r.state) != self.n:
                raise CsgError(f"reward structure {name!r} has wrong length")
        self.reachable = self._reachable()

    def joint_name(self, joint: tuple[int, ...]) -> str:
        return "(" + ",".join(IDLE if a < 0 else self.actions[i][a] for i, a in enumerate(joint)) + ")"

    def delta(self, s: int, joint: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
        try:
            return self.trans[s][joint]
        except KeyError:
            raise CsgError(f"joint action {self.joint_name(joint)} is not enabled at state "
                           f"{self.state_names[s]}") from None

    def player_index(self, name: str) -> int:
        try:
            return self.players.index(name)
        except ValueError:
            raise CsgError(f"unknown player {name!r}") from None

    def state_index(self, name: str) -> int:
        try:
            return self.state_names.index(str(name))
        except ValueError:
            raise CsgError(f"unknown state {name!r}") from None

    def _reachable(self) -> np.ndarray:
        seen = np.zeros(self.n, dtype=bool)
        seen[self.initial] = True
        queue = deque(self.initial)
        while queue:
            s = queue.popleft()
            for succ, _ in self.trans[s].values():
                for t in succ:
                    if not seen[t]:
                        seen[t] = True
                        queue.append(t)
        return seen

    def sat_atom(self, atom: str) -> np.ndarray:
        return np.array([atom in l for l in self.labels], dtype=bool)


def build_csg(spec: ModelSpec) -> Csg:
    """Turn a parsed model into a :class:`Csg`."""
    index = {s.name: i for i, s in enumerate(spec.states)}
    act_index = [{a: k for k, a in enumerate(p.actions)} for p in spec.players]

    def joint_ix(joint, line):
        return tuple(-1 if a == IDLE else act_index[i][a] for i, a in enumerate(joint))

    trans: list[dict] = [dict() for _ in spec.states]
    for t in spec.transitions:
        dist: dict[int, float] = defaultdict(float)
        for _, p, target in t.outcomes:
            dist[index[target]] += float(p)
        trans[index[t.state]][joint_ix(t.joint, t.line)] = dict(dist)

    rewards: dict[str, RewardStructure] = {}
    for r in spec.rewards:
        rs = rewards.get(r.name)
        if rs is None:
            rs = rewards[r.name] = RewardStructure(np.zeros(len(spec.states)), [dict() for _ in spec.states])
        targets = range(len(spec.states)) if r.state == "*" else [index[r.state]]
        for s in targets:
            if r.kind == "state":
                rs.state[s] = float(r.value)
            elif r.joint == ("*",):
                for j in trans[s]:
                    rs.action[s][j] = float(r.value)
            else:
                j = joint_ix(r.joint, r.line)
                if j not in trans[s]:
                    if r.state == "*":
                        continue
                    raise ModelError(f"reward on joint action {'(' + ','.join(r.joint) + ')'} "
                                     f"not enabled at state {r.state}", r.line)
                rs.action[s][j] = float(r.value)
    try:
        return Csg([p.name for p in spec.players], [p.actions for p in spec.players],
                   [s.name for s in spec.states], [i for i, s in enumerate(spec.states) if s.init],
                   [s.labels for s in spec.states], trans, rewards, spec.atoms)
    except CsgError as e:
        raise ModelError(str(e)) from None


def load_model(text: str, params: dict | None = None) -> Csg:
    from .modelfile import parse_model, substitute
    return build_csg(parse_model(substitute(text, params or {})))


@dataclass
class Block:
    """States sharing one (rows, cols, successors) shape, stacked for numpy."""
    states: np.ndarray
    probs: np.ndarray      # (nb, l, m, k)
    succ: np.ndarray       # (nb, k)

    @property
    def shape(self):
        return self.probs.shape[1:3]


class CoalitionGame:
    """Two-player game with per-state dense ``(l, m, k)`` transition arrays.

    Row ``i`` at state ``s`` is the coalition action ``rows[s][i]`` and column
    ``j`` the opponents' action ``cols[s][j]``; both are tuples of original
    action names (``-`` for idle members). ``probs[s][i, j, :]`` is the
    distribution over ``succ[s]``.
    """

    def __init__(self, rows, cols, succ, probs, labels, initial, rewards=None, state_names=None,
                 atoms=(), coalitions=(("1",), ("2",)), reachable=None):
        self.n = len(probs)
        self.rows = rows
        self.cols = cols
        self.succ = succ
        self.probs = probs
        self.labels = [frozenset(l) for l in labels]
        self.initial = list(initial)
        self.rewards = rewards or {}     # name -> (list of (l, m) arrays, state reward vector)
        self.state_names = list(state_names) if state_names is not None else [str(i) for i in range(self.n)]
        self.atoms = frozenset(atoms) | frozenset().union(*self.labels) if self.labels else frozenset(atoms)
        self.coalitions = coalitions
        self.reachable = reachable if reachable is not None else self._reachable()
        self._blocks = None
        self._support = None

    def _reachable(self) -> np.ndarray:
        seen = np.zeros(self.n, dtype=bool)
        seen[self.initial] = True
        queue = deque(self.initial)
        while queue:
            s = queue.popleft()
            live = self.probs[s].reshape(-1, len(self.succ[s])).max(axis=0) > 0
            for t in self.succ[s][live]:
                if not seen[t]:
                    seen[t] = True
                    queue.append(t)
        return seen

    def shape(self, s: int) -> tuple[int, int]:
        return self.probs[s].shape[:2]

    def sat_atom(self, atom: str) -> np.ndarray:
        return np.array([atom in l for l in self.labels], dtype=bool)

    def blocks(self) -> list[Block]:
        if self._blocks is None:
            groups = defaultdict(list)
            for s in range(self.n):
                groups[self.probs[s].shape].append(s)
            self._blocks = []
            for shape in sorted(groups):
                ss = groups[shape]
                self._blocks.append(Block(np.array(ss, dtype=np.intp),
                                          np.stack([self.probs[s] for s in ss]),
                                          np.stack([self.succ[s] for s in ss]).reshape(len(ss), shape[2])))
        return self._blocks

    def reward_arrays(self, name: str):
        try:
            return self.rewards[name]
        except KeyError:
            raise CsgError(f"unknown reward structure {name!r}") from None

    def block_rewards(self, name: str, block: Block, include_state: bool = True) -> np.ndarray:
        """``r_A + r_S`` for every joint action of every state in ``block``."""
        act, state = self.reward_arrays(name)
        out = np.stack([act[s] for s in block.states])
        if include_state:
            out = out + state[block.states][:, None, None]
        return out

    def support(self) -> list[np.ndarray]:
        """Boolean ``(l, m, k)`` arrays marking positive-probability successors."""
        if self._support is None:
            self._support = [p > 0 for p in self.probs]
        return self._support

    def swapped(self) -> "CoalitionGame":
        """The same game with the two players exchanged."""
        rewards = {k: ([a.T for a in act], st) for k, (act, st) in self.rewards.items()}
        return CoalitionGame(self.cols, self.rows, self.succ, [p.transpose(1, 0, 2) for p in self.probs],
                             self.labels, self.initial, rewards, self.state_names, self.atoms,
                             (self.coalitions[1], self.coalitions[0]), self.reachable)

    def with_rewards(self, rewards) -> "CoalitionGame":
        g = CoalitionGame(self.rows, self.cols, self.succ, self.probs, self.labels, self.initial, rewards,
                          self.state_names, self.atoms, self.coalitions, self.reachable)
        g._blocks = self._blocks
        g._support = self._support
        return g


def coalition_game(g: Csg, coalition: Iterable[str | int], allow_trivial: bool = True) -> CoalitionGame:
    """Group the players of ``g`` into ``coalition`` versus everyone else.

    With ``allow_trivial`` an empty or full coalition is accepted; the
    empty side then has a single idle action everywhere. Equilibrium
    queries pass ``allow_trivial=False``.
    """
    members = sorted({m if isinstance(m, int) else g.player_index(m) for m in coalition})
    others = [i for i in range(len(g.players)) if i not in members]
    if not allow_trivial and (not members or not others):
        raise CsgError("coalition must be a non-empty proper subset of the players")

    def options(s, side):
        return list(product(*[g.available[s][i] if g.available[s][i] else (-1,) for i in side]))

    def name(side, combo):
        return tuple(IDLE if a < 0 else g.actions[i][a] for i, a in zip(side, combo))

    rows, cols, succs, probs = [], [], [], []
    acts = {k: [] for k in g.rewards}
    for s in range(g.n):
        R, C = options(s, members), options(s, others)
        targets = sorted({t for succ, _ in g.trans[s].values() for t in succ})
        pos = {t: k for k, t in enumerate(targets)}
        P = np.zeros((len(R), len(C), len(targets)))
        ra = {k: np.zeros((len(R), len(C))) for k in g.rewards}
        for i, rc in enumerate(R):
            for j, cc in enumerate(C):
                joint = [0] * len(g.players)
                for idx, a in zip(members, rc):
                    joint[idx] = a
                for idx, a in zip(others, cc):
                    joint[idx] = a
                joint = tuple(joint)
                succ, p = g.delta(s, joint)
                for t, q in zip(succ, p):
                    P[i, j, pos[t]] += q
                for k, r in g.rewards.items():
                    ra[k][i, j] = r.act(s, joint)
        rows.append([name(members, c) for c in R])
        cols.append([name(others, c) for c in C])
        succs.append(np.array(targets, dtype=np.intp))
        probs.append(P)
        for k in g.rewards:
            acts[k].append(ra[k])
    rewards = {k: (acts[k], g.rewards[k].state.copy()) for k in g.rewards}
    names = (tuple(g.players[i] for i in members), tuple(g.players[i] for i in others))
    return CoalitionGame(rows, cols, succs, probs, g.labels, g.initial, rewards, g.state_names, g.atoms,
                         names, g.reachable.copy())


class Mdp:
    """Explicit MDP: ``probs[s]`` is ``(a, k)`` over successors ``succ[s]``.

    ``rewards[name] = (action list of (a,) arrays, state vector)``. A CSR
    matrix over all (state, action) rows backs the vectorised sweeps.
    """

    def __init__(self, succ, probs, labels=None, rewards=None, action_labels=None, state_names=None):
        self.n = len(probs)
        self.succ = succ
        self.probs = probs
        self.labels = [frozenset(l) for l in labels] if labels is not None else [frozenset()] * self.n
        self.rewards = rewards or {}
        self.action_labels = action_labels
        self.state_names = state_names
        counts = np.array([p.shape[0] for p in probs], dtype=np.intp)
        if (counts == 0).any():
            raise CsgError("every MDP state needs at least one action")
        self.row_ptr = np.concatenate([[0], np.cumsum(counts)])
        self.row_state = np.repeat(np.arange(self.n), counts)
        data, ind, ptr = [], [], [0]
        for s in range(self.n):
            for a in range(counts[s]):
                nz = probs[s][a] > 0
                data.append(probs[s][a][nz])
                ind.append(succ[s][nz])
                ptr.append(ptr[-1] + int(nz.sum()))
        self.T = sp.csr_matrix((np.concatenate(data) if data else np.zeros(0),
                                np.concatenate(ind).astype(np.intp) if ind else np.zeros(0, np.intp),
                                np.array(ptr)), shape=(len(self.row_state), self.n))
        self.T_bool = self.T.astype(bool).astype(np.int32)

    @property
    def n_rows(self) -> int:
        return len(self.row_state)

    def sat_atom(self, atom: str) -> np.ndarray:
        return np.array([atom in l for l in self.labels], dtype=bool)

    def row_rewards(self, name: str, include_state: bool = True) -> np.ndarray:
        act, state = self.rewards[name]
        r = np.concatenate(act) if act else np.zeros(0)
        if include_state:
            r = r + state[self.row_state]
        return r

    def reduce(self, q: np.ndarray, how: str) -> np.ndarray:
        """Per-state max or min over the row vector ``q``."""
        f = np.maximum if how == "max" else np.minimum
        return f.reduceat(q, self.row_ptr[:-1])


def induced_mdp(g: CoalitionGame) -> Mdp:
    """Both players acting as one: every enabled joint pair becomes an action."""
    succ, probs, labels = [], [], []
    for s in range(g.n):
        l, m, k = g.probs[s].shape
        probs.append(g.probs[s].reshape(l * m, k))
        succ.append(g.succ[s])
        labels.append([(i, j) for i in range(l) for j in range(m)])
    rewards = {name: ([a.reshape(-1) for a in act], st) for name, (act, st) in g.rewards.items()}
    return Mdp(succ, probs, g.labels, rewards, labels, g.state_names)


@dataclass
class MarkovChain:
    nodes: list[tuple]                 # (state, memory, step)
    index: dict[tuple, int]
    P: sp.csr_matrix                   # row-stochastic


def induced_chain(g: CoalitionGame, profile, starts: Iterable[tuple] | None = None) -> MarkovChain:
    """Markov chain of ``g`` under a strategy profile.

    ``profile`` must provide ``initial_node(s)``, ``distributions(node)``
    returning the two mixed actions, and ``successor(node, t)``. Nodes are
    explored from ``starts`` (default: every state's initial node).
    """
    if starts is None:
        starts = [profile.initial_node(s) for s in range(g.n)]
    nodes, index = [], {}
    queue = deque()
    for node in starts:
        if node not in index:
            index[node] = len(nodes)
            nodes.append(node)
            queue.append(node)
    rows = []
    while queue:
        node = queue.popleft()
        s = node[0]
        x, y = profile.distributions(node)
        joint = np.einsum("i,j,ijk->k", x, y, g.probs[s])
        row = {}
        for t, p in zip(g.succ[s], joint):
            if p <= 0:
                continue
            nxt = profile.successor(node, int(t))
            if nxt not in index:
                index[nxt] = len(nodes)
                nodes.append(nxt)
                queue.append(nxt)
            row[index[nxt]] = row.get(index[nxt], 0.0) + p
        rows.append((index[node], row))
    r_idx, c_idx, vals = [], [], []
    for i, row in rows:
        for j, p in row.items():
            r_idx.append(i)
            c_idx.append(j)
            vals.append(p)
    P = sp.csr_matrix((vals, (r_idx, c_idx)), shape=(len(nodes), len(nodes)))
    return MarkovChain(nodes, index, P)
