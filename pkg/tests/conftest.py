from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from csgcheck.game import Csg, RewardStructure, load_model

MODELS = Path(__file__).resolve().parent.parent / "models"

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


def model_text(name: str) -> str:
    return (MODELS / name).read_text(encoding="utf-8")


def load(name: str, **params) -> Csg:
    return load_model(model_text(name), params)


@pytest.fixture(scope="session")
def rps():
    return load("rps.csg")


@pytest.fixture(scope="session")
def stag():
    return load("stag_hunt.csg")


def random_csg(rng: np.random.Generator, n: int | None = None, max_actions: int = 3, players: int = 2,
               target_frac: float = 0.3, rewards: bool = False, absorbing_targets: bool = False,
               integer_rewards: bool = False) -> Csg:
    """Small random game with labels ``t``/``a``/``b`` and optional rewards ``r1``/``r2``.

    Distributions have at most three successors with probabilities on a
    1/8 grid, so solvers meet plenty of ties and degenerate games.
    """
    n = n or int(rng.integers(2, 7))
    acts = [[f"a{p}_{k}" for k in range(max_actions)] for p in range(players)]
    avail = [[int(rng.integers(1, max_actions + 1)) for _ in range(players)] for _ in range(n)]
    labels = []
    for s in range(n):
        lab = set()
        if rng.random() < target_frac:
            lab.add("t")
        if rng.random() < 0.5:
            lab.add("a")
        if rng.random() < 0.4:
            lab.add("b")
        labels.append(lab)
    trans = []
    for s in range(n):
        table = {}
        for joint in np.ndindex(*avail[s]):
            if absorbing_targets and "t" in labels[s]:
                table[tuple(joint)] = {s: 1.0}
                continue
            k = int(rng.integers(1, min(3, n) + 1))
            succ = rng.choice(n, size=k, replace=False)
            cuts = np.sort(rng.integers(1, 8, size=k - 1)) / 8.0
            probs = np.diff(np.concatenate([[0.0], cuts, [1.0]]))
            dist: dict[int, float] = {}
            for t, p in zip(succ, probs):
                if p > 0:
                    dist[int(t)] = dist.get(int(t), 0.0) + float(p)
            table[tuple(joint)] = dist
        trans.append(table)
    rew = {}
    if rewards:
        for name in ("r1", "r2"):
            draw = (lambda: float(rng.integers(0, 4))) if integer_rewards else (lambda: float(rng.random()))
            state = np.array([draw() for _ in range(n)])
            action = [{j: draw() for j in trans[s]} for s in range(n)]
            rew[name] = RewardStructure(state, action)
    return Csg([f"p{p}" for p in range(players)], acts, [f"s{s}" for s in range(n)], [0], labels, trans,
               rew, atoms=("t", "a", "b"))
