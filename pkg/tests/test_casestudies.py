import numpy as np
import pytest

from csgcheck.casestudies import main, robot_grid
from csgcheck.game import load_model


def test_grid_sizes():
    g = load_model(robot_grid(4), {"q": "0.25"})
    assert g.n == 226
    assert sum(len(succ) for table in g.trans for succ, _ in table.values()) == 6610


def test_corner_moves_on_three_by_three():
    q = 0.25
    g = load_model(robot_grid(3), {"q": str(q)})
    s = g.state_index("r0_0_2_2")
    n1 = g.actions[0].index("n1")
    sw2 = g.actions[1].index("sw2")
    succ, probs = g.delta(s, (n1, sw2))
    assert len(succ) == 6 and probs.sum() == pytest.approx(1)
    crash = sum(p for t, p in zip(succ, probs) if "c" in g.labels[t])
    assert crash == pytest.approx(q / 2 * (1 - q))


@pytest.mark.parametrize("l", [2, 3, 5])
def test_every_distribution_sums_to_one(l):
    g = load_model(robot_grid(l), {"q": "0.1"})
    for s in range(g.n):
        for joint in g.trans[s]:
            assert g.delta(s, joint)[1].sum() == pytest.approx(1, abs=1e-12)
    start = g.initial[0]
    assert g.state_names[start] == f"r0_0_{l - 1}_{l - 1}"
    assert not np.any([("g1" in lab) and ("g2" in lab) for lab in [g.labels[start]]])


def test_generator_cli(tmp_path, capsys):
    out = tmp_path / "robot3.csg"
    assert main(["3", "-o", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == robot_grid(3)
    main(["2"])
    assert capsys.readouterr().out == robot_grid(2)
    with pytest.raises(ValueError):
        robot_grid(1)
