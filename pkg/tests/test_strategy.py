import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csgcheck.checker import check
from csgcheck.game import Csg, coalition_game
from csgcheck.objectives import UntilObj
from csgcheck.strategy import (SWITCHED, Entry, StrategyProfile, assemble, certify_epsilon, evaluate_profile,
                               export_graph, export_table, parse_table)

from conftest import load
from oracles import pure_deviation_gap

STAG = '<<h1:h2,h3>> max=? ( R{"u1"}[ C<=1 ] + R{"u23"}[ C<=1 ] )'


def stag_profile(stag):
    r = check(stag, STAG, synth=True)
    return r, assemble(r)


def test_rps_graph(rps):
    r = check(rps, '<<p1>> Pmax=? [ !"win2" U "win1" ]', synth=True)
    prof = assemble(r)
    dot = export_graph(prof)
    assert dot.count("[label=") - dot.count("->") == 4
    assert "switched" not in dot and "1/3" in dot
    vals = evaluate_profile(r.game, r.objectives, prof)[:, 0]
    assert vals[rps.state_index("s0")] == pytest.approx(0.5, abs=1e-6)


def test_mac_profile_switches():
    g = load("mac.csg", q="0.9")
    r = check(g, '<<u1:u2>> max=? ( P[ F "tr1" ] + P[ F "tr2" ] )', force=True, synth=True)
    prof = assemble(r)
    reach = prof.nodes([prof.initial_node(s) for s in g.initial])
    assert any(mode in SWITCHED for _, mode, _ in reach)
    assert "switched" in export_graph(prof)
    assert certify_epsilon(r.game, r.objectives, prof).epsilon == pytest.approx(0, abs=1e-9)
    got = evaluate_profile(r.game, r.objectives, prof)
    assert got[g.state_index("s0")] == pytest.approx([1, 1], abs=1e-9)


def test_stag_certificate_and_perturbation(stag):
    r, prof = stag_profile(stag)
    root = stag.state_index("root")
    assert r.values[root] == pytest.approx([6, 9])
    assert certify_epsilon(r.game, r.objectives, prof).epsilon == pytest.approx(0, abs=1e-9)
    node = prof.initial_node(root)
    e = prof.entries[node]
    x = e.x.copy()
    i = int(np.argmax(x))
    x[i] -= 0.1
    x[(i + 1) % len(x)] += 0.1
    prof.entries[node] = Entry(x, e.y, "perturbed")
    cert = certify_epsilon(r.game, r.objectives, prof)
    cg = r.game
    act1, _ = cg.reward_arrays("u1")
    act2, _ = cg.reward_arrays("u23")
    # one step of reward then an absorbing zero-reward state: the bimatrix is the whole game
    want = pure_deviation_gap(act1[root], act2[root], x, e.y)
    assert cert.epsilon > 0
    assert cert.epsilon == pytest.approx(want, abs=1e-9)


def test_table_round_trip(stag):
    r, prof = stag_profile(stag)
    text = export_table(prof)
    assert text.endswith("\n") and "\r" not in text
    table = parse_table(text)
    g = prof.game
    for (s, mode, t), e in prof.entries.items():
        row = table[(g.state_names[s], mode, t)]
        for side, names, dist in ((g.coalitions[0], g.rows[s], e.x), (g.coalitions[1], g.cols[s], e.y)):
            for a, p in zip(names, dist):
                key = ",".join(side) + "=" + ",".join(a)
                assert float(f"{row.get(key, 0.0):.12g}") == float(f"{p:.12g}")


def one_state(probs_self: float):
    trans = [{(0, 0): {0: probs_self, 1: 1 - probs_self} if probs_self < 1 else {0: 1.0}}, {(0, 0): {1: 1.0}}]
    return Csg(["a", "b"], [["x"], ["y"]], ["s", "t"], [0], [set(), {"goal"}], trans, {}, atoms=("goal",))


def test_single_action_game_is_exact():
    g = one_state(0.5)
    cg = coalition_game(g, ["a"], allow_trivial=False)
    prof = StrategyProfile(cg)
    for s in range(2):
        prof.entries[(s, "main", 0)] = Entry(np.ones(1), np.ones(1), "only")
    objs = (UntilObj(np.ones(2, bool), g.sat_atom("goal")), UntilObj(np.ones(2, bool), g.sat_atom("goal")))
    assert certify_epsilon(cg, objs, prof).epsilon == 0
    assert evaluate_profile(cg, objs, prof)[0] == pytest.approx([1, 1])


def test_self_loop_never_reaches():
    g = one_state(1.0)
    cg = coalition_game(g, ["a"], allow_trivial=False)
    prof = StrategyProfile(cg)
    obj = UntilObj(np.ones(2, bool), g.sat_atom("goal"))
    vals = evaluate_profile(cg, (obj,), prof)[:, 0]
    assert vals[0] == 0 and vals[1] == 1


@given(st.floats(0.01, 0.99))
def test_bounded_reach_on_a_loop(p):
    g = one_state(1 - p)
    cg = coalition_game(g, ["a"], allow_trivial=False)
    prof = StrategyProfile(cg, cap=5)
    got = evaluate_profile(cg, (UntilObj(np.ones(2, bool), g.sat_atom("goal"), 3),), prof)[0, 0]
    assert got == pytest.approx(1 - (1 - p) ** 3)
