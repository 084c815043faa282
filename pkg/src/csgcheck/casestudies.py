"""Generators for case-study models written in the explicit game format.

Robot coordination on an ``l x l`` grid
---------------------------------------
Robot 1 starts in the south-west corner ``(0, 0)`` and heads for the
north-east corner; robot 2 does the reverse. A state is the pair of cells.

* A robot away from its goal picks one of the moves towards it (for robot
  1: ``n``, ``e``, ``ne``; for robot 2: ``s``, ``w``, ``sw``) whose
  intended cell lies on the grid. At its goal it idles (``-``).
* The intended cell is reached with probability ``1-q``; each of the two
  neighbouring compass directions (45 degrees either side) is taken with
  probability ``q/2``. A deviation that would leave the grid is folded back
  into the intended move.
* The robots move concurrently and independently. ``c`` labels states where
  both share a cell; crashing does not stop the game. ``g1`` / ``g2`` label
  states where the robot has reached its goal.
* Reward ``steps`` pays 1 per joint move of a state where some robot is
  still moving; ``crash`` pays 1 in crash states.

Probabilities keep ``${q}`` symbolic so that sweeps over ``q`` substitute it.
With one neighbour folded in, a robot in the south-west corner trying to go
north and a robot in the north-east corner trying to go south-west on a
3x3 grid give six outcomes, crashing with probability ``q/2 * (1-q)``.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction
from pathlib import Path

# compass directions in clockwise order
_DIRS = ["n", "ne", "e", "se", "s", "sw", "w", "nw"]
_STEP = {"n": (0, 1), "ne": (1, 1), "e": (1, 0), "se": (1, -1),
         "s": (0, -1), "sw": (-1, -1), "w": (-1, 0), "nw": (-1, 1)}
_TOWARDS = {1: ("n", "e", "ne"), 2: ("s", "w", "sw")}

Poly = tuple[Fraction, Fraction, Fraction]   # c0 + c1*q + c2*q^2


def _move(cell, d):
    dx, dy = _STEP[d]
    return cell[0] + dx, cell[1] + dy


def _robot_outcomes(cell, d, l):
    """``{cell: (a, b)}`` meaning probability ``a + b*q``."""
    on = lambda c: 0 <= c[0] < l and 0 <= c[1] < l
    k = _DIRS.index(d)
    out = {_move(cell, d): [Fraction(1), Fraction(-1)]}
    for side in (_DIRS[(k - 1) % 8], _DIRS[(k + 1) % 8]):
        target = _move(cell, side)
        if not on(target):
            target = _move(cell, d)
        out.setdefault(target, [Fraction(0), Fraction(0)])
        out[target][1] += Fraction(1, 2)
    return {c: tuple(v) for c, v in out.items()}


def _mul(a, b) -> Poly:
    return a[0] * b[0], a[0] * b[1] + a[1] * b[0], a[1] * b[1]


def _fmt_poly(p: Poly) -> str:
    terms = []
    for coeff, suffix in zip(p, ("", "*${q}", "*${q}*${q}")):
        if coeff == 0:
            continue
        c = str(coeff) if coeff.denominator == 1 else f"({coeff})"
        terms.append(c + suffix if not suffix or coeff != 1 else suffix[1:])
    text = "+".join(terms) or "0"
    return "(" + text.replace("+-", "-") + ")"


def robot_choices(robot: int, cell, l: int):
    goal = (l - 1, l - 1) if robot == 1 else (0, 0)
    if cell == goal:
        return [None]
    return [d for d in _TOWARDS[robot] if 0 <= _move(cell, d)[0] < l and 0 <= _move(cell, d)[1] < l]


def robot_grid(l: int) -> str:
    """Model text for the ``l x l`` grid with symbolic ``${q}``."""
    if l < 2:
        raise ValueError("grid size must be at least 2")
    start = ((0, 0), (l - 1, l - 1))
    name = lambda st: f"r{st[0][0]}_{st[0][1]}_{st[1][0]}_{st[1][1]}"
    seen = {start: 0}
    order = [start]
    queue = deque([start])
    trans = []
    while queue:
        st = queue.popleft()
        p1, p2 = st
        for d1 in robot_choices(1, p1, l):
            o1 = {p1: (Fraction(1), Fraction(0))} if d1 is None else _robot_outcomes(p1, d1, l)
            for d2 in robot_choices(2, p2, l):
                o2 = {p2: (Fraction(1), Fraction(0))} if d2 is None else _robot_outcomes(p2, d2, l)
                dist = []
                for c1, a in o1.items():
                    for c2, b in o2.items():
                        nxt = (c1, c2)
                        if nxt not in seen:
                            seen[nxt] = len(order)
                            order.append(nxt)
                            queue.append(nxt)
                        dist.append((_fmt_poly(_mul(a, b)), name(nxt)))
                joint = f"({d1 + '1' if d1 else '-'},{d2 + '2' if d2 else '-'})"
                trans.append((st, joint, dist))
    goal1, goal2 = (l - 1, l - 1), (0, 0)
    lines = [f"# Robot coordination on a {l}x{l} grid; generated by csgcheck.casestudies.robot_grid.",
             "csg", "players 2",
             "player rbt1 actions " + " ".join(d + "1" for d in _TOWARDS[1]),
             "player rbt2 actions " + " ".join(d + "2" for d in _TOWARDS[2])]
    for st in order:
        labels = [lab for lab, on in (("c", st[0] == st[1]), ("g1", st[0] == goal1), ("g2", st[1] == goal2)) if on]
        init = " init" if st == start else ""
        lines.append(f"state {name(st)}{init} labels {{{', '.join(labels)}}}")
    for st, joint, dist in trans:
        lines.append(f"trans {name(st)} {joint} -> " + " + ".join(f"{p}:{t}" for p, t in dist))
    for st, joint, _ in trans:
        if joint != "(-,-)":
            lines.append(f"reward steps act {name(st)} {joint} = 1")
    for st in order:
        if st[0] == st[1]:
            lines.append(f"reward crash state {name(st)} = 1")
    return "\n".join(lines) + "\n"


def write_robot_grid(l: int, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(robot_grid(l), encoding="utf-8", newline="\n")
    return path


def main(argv=None) -> int:
    import argparse
    p = argparse.ArgumentParser(prog="python -m csgcheck.casestudies",
                                description="write the robot coordination model for an l x l grid")
    p.add_argument("size", type=int, help="grid size l")
    p.add_argument("-o", "--output", type=Path, help="output file (default: stdout)")
    args = p.parse_args(argv)
    if args.output:
        write_robot_grid(args.size, args.output)
    else:
        print(robot_grid(args.size), end="")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
