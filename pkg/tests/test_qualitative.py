import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from csgcheck.game import coalition_game
from csgcheck.qualitative import (almost_sure_reach, check_reward_loops, check_unavoidable, positive_reach,
                                  prob0_prob1)
from csgcheck.zerosum import zs_until

from conftest import load, random_csg


def names(g, mask):
    return {g.state_names[s] for s in np.flatnonzero(mask)}


def test_rps_sets(rps):
    cg = coalition_game(rps, ["p1"])
    win1, win2 = rps.sat_atom("win1"), rps.sat_atom("win2")
    every = np.ones(rps.n, bool)
    # restarting after every round, p1 wins eventually with probability 1 by mixing
    assert almost_sure_reach(cg, win1, every).all()
    q = prob0_prob1(cg, ~win2, win1)
    assert names(rps, q.S1) == {"s1"}
    assert names(rps, q.S0) == {"s2"}


def test_witness_is_uniform_over_safe_actions(rps):
    cg = coalition_game(rps, ["p1"])
    S, witness = almost_sure_reach(cg, rps.sat_atom("win1"), np.ones(rps.n, bool), witness=True)
    s0 = rps.state_index("s0")
    assert np.allclose(witness[s0], 1 / 3)


def test_convergence_checks():
    b = load("negative_loop.csg")
    cg = coalition_game(b, ["p1"])
    rep = check_reward_loops(cg, "r", b.sat_atom("a"))
    assert not rep.ok and "s1" in rep.violations
    c = load("handoff.csg")
    cg = coalition_game(c, ["p1"], allow_trivial=False)
    rep = check_unavoidable(cg, [c.sat_atom("a1"), c.sat_atom("a2")])
    assert not rep.ok and {"s1", "s2"} <= set(rep.violations)
    d = load("handoff_rewards.csg")
    cg = coalition_game(d, ["p1"], allow_trivial=False)
    rep = check_unavoidable(cg, [d.sat_atom("a")], name="unavoidable reward targets")
    assert not rep.ok and set(rep.violations) == {"s1", "s2"}


def test_mac_has_avoidable_targets():
    g = load("mac.csg", q="0.9")
    cg = coalition_game(g, ["u1"], allow_trivial=False)
    rep = check_unavoidable(cg, [g.sat_atom("tr1"), g.sat_atom("tr2")])
    assert not rep.ok and "s0" in rep.violations


@given(st.integers(0, 2**32 - 1))
def test_sets_agree_with_values(seed):
    rng = np.random.default_rng(seed)
    g = random_csg(rng)
    cg = coalition_game(g, ["p0"])
    sat1, sat2 = g.sat_atom("a") | g.sat_atom("t"), g.sat_atom("t")
    for opt in ("max", "min"):
        q = prob0_prob1(cg, sat1, sat2, minimize=opt == "min")
        v = zs_until(cg, sat1, sat2, opt).values
        assert (v[q.S0] == 0).all() and (v[q.S1] == 1).all()
        maybe = ~(q.S0 | q.S1)
        # outside the fixed sets values may still be (limit) 1 but never exactly 0
        assert (v[maybe] > 0).all()
    assert (positive_reach(cg, sat2, sat1) >= prob0_prob1(cg, sat1, sat2).S1).all()
