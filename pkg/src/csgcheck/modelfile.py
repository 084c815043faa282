"""Reader and printer for the line-oriented explicit-state game format.

Example::

    csg
    players 2
    player p1 actions r1 p1a s1 t1
    player p2 actions r2 p2a s2 t2
    state 0 init labels {}
    state 1 labels {win1}
    trans 0 (r1,r2) -> 1.0:3
    trans 0 (r1,s2) -> 1/2:1 + 1/2:2
    reward steps state 0 = 0
    reward steps act 0 (r1,r2) = 1

``-`` stands for the idle action inside joint-action tuples. Probabilities
and reward values are arithmetic expressions over decimal numbers and
fractions (``1-0.9``, ``(1-q)/2`` after parameter substitution). ``*``
may replace the state and the joint action of a reward line.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

DIST_TOL = 1e-9
IDLE = "-"


class ModelError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}" + (f", column {col}" if col else "") if line else ""
        super().__init__(f"{where}: {message}" if where else message)


@dataclass
class PlayerDecl:
    name: str
    actions: list[str]
    line: int = 0


@dataclass
class StateDecl:
    name: str
    init: bool
    labels: list[str]
    line: int = 0


@dataclass
class TransDecl:
    state: str
    joint: tuple[str, ...]
    outcomes: list[tuple[str, Fraction, str]]   # (probability text, value, target)
    line: int = 0


@dataclass
class RewardDecl:
    name: str
    kind: str                                   # "state" or "act"
    state: str                                  # state name or "*"
    joint: tuple[str, ...] | None               # None for state rewards, ("*",) for any
    text: str
    value: Fraction
    line: int = 0


@dataclass
class ModelSpec:
    players: list[PlayerDecl]
    states: list[StateDecl]
    transitions: list[TransDecl]
    rewards: list[RewardDecl] = field(default_factory=list)
    atoms: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        return format_model(self)


_NAME = r"[A-Za-z0-9_][A-Za-z0-9_.']*"
_NAME_RE = re.compile(rf"^{_NAME}$")


def _arith(text: str, line: int) -> Fraction:
    """Evaluate an arithmetic expression over exact fractions."""
    try:
        return _arith_text(text.strip())
    except ModelError as e:
        raise ModelError(e.message, line) from None


@lru_cache(maxsize=65536)
def _arith_text(text: str) -> Fraction:
    line = None
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ModelError(f"malformed number {text.strip()!r}", line) from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return Fraction(str(node.value)) if isinstance(node.value, float) else Fraction(node.value)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
            a, b = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if b == 0:
                raise ModelError(f"division by zero in {text.strip()!r}", line)
            return a / b
        raise ModelError(f"malformed number {text.strip()!r}", line)

    return ev(tree)


def _split_top(text: str, sep: str) -> list[str]:
    if "(" not in text:
        return text.split(sep)
    parts, depth, start = [], 0, 0
    for m in re.finditer(r"[()]|" + re.escape(sep), text):
        ch = m.group()
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif depth == 0:
            parts.append(text[start:m.start()])
            start = m.end()
    parts.append(text[start:])
    return parts


def _check_name(tok: str, what: str, line: int) -> str:
    if not _NAME_RE.match(tok):
        raise ModelError(f"invalid {what} name {tok!r}", line)
    return tok


_STATE_RE = re.compile(r"^state\s+(\S+)(\s+init)?(?:\s+labels\s*\{(.*)\})?\s*$")
_TRANS_RE = re.compile(r"^trans\s+(\S+)\s*\(([^)]*)\)\s*->\s*(.+)$")
_REW_STATE_RE = re.compile(r"^reward\s+(\S+)\s+state\s+(\S+)\s*=\s*(.+)$")
_REW_ACT_RE = re.compile(r"^reward\s+(\S+)\s+act\s+(\S+)\s*(\([^)]*\)|\*)\s*=\s*(.+)$")


def parse_model(text: str) -> ModelSpec:
    """Parse model text, checking declarations and distributions."""
    players: list[PlayerDecl] = []
    states: list[StateDecl] = []
    trans: list[TransDecl] = []
    rewards: list[RewardDecl] = []
    atoms: list[str] = []
    n_players = None
    seen_header = False

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not seen_header:
            if line != "csg":
                raise ModelError("model must start with the header 'csg'", lineno, 1)
            seen_header = True
            continue
        word = line.split()[0]
        if word == "players":
            parts = line.split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise ModelError("expected 'players <count>'", lineno)
            n_players = int(parts[1])
        elif word == "player":
            parts = line.split()
            if len(parts) < 3 or parts[2] != "actions":
                raise ModelError("expected 'player <name> actions <a1> <a2> ...'", lineno)
            acts = [_check_name(a, "action", lineno) for a in parts[3:]]
            players.append(PlayerDecl(_check_name(parts[1], "player", lineno), acts, lineno))
        elif word == "atoms":
            atoms.extend(_check_name(a, "atom", lineno) for a in line.split()[1:])
        elif word == "state":
            m = _STATE_RE.match(line)
            if not m:
                raise ModelError("expected 'state <name> [init] [labels {a, b}]'", lineno)
            labels = [t.strip() for t in (m.group(3) or "").split(",") if t.strip()]
            for lab in labels:
                _check_name(lab, "label", lineno)
            states.append(StateDecl(_check_name(m.group(1), "state", lineno), bool(m.group(2)),
                                    labels, lineno))
        elif word == "trans":
            m = _TRANS_RE.match(line)
            if not m:
                raise ModelError("expected 'trans <state> (<a1>,...,<an>) -> p:t + ...'", lineno)
            joint = tuple(a.strip() for a in m.group(2).split(","))
            outcomes = []
            for term in _split_top(m.group(3), "+"):
                if ":" in term:
                    ptext, target = term.rsplit(":", 1)
                else:
                    ptext, target = "1", term
                ptext, target = ptext.strip(), target.strip()
                outcomes.append((ptext, _arith(ptext, lineno), target))
            trans.append(TransDecl(m.group(1), joint, outcomes, lineno))
        elif word == "reward":
            m = _REW_STATE_RE.match(line)
            if m:
                rewards.append(RewardDecl(_check_name(m.group(1), "reward", lineno), "state", m.group(2),
                                          None, m.group(3).strip(), _arith(m.group(3), lineno), lineno))
                continue
            m = _REW_ACT_RE.match(line)
            if not m:
                raise ModelError("expected 'reward <name> state <s> = v' or 'reward <name> act <s> (<a1>,...) = v'",
                                 lineno)
            jt = m.group(3)
            joint = ("*",) if jt == "*" else tuple(a.strip() for a in jt[1:-1].split(","))
            rewards.append(RewardDecl(_check_name(m.group(1), "reward", lineno), "act", m.group(2), joint,
                                      m.group(4).strip(), _arith(m.group(4), lineno), lineno))
        else:
            raise ModelError(f"unknown declaration {word!r}", lineno, 1)

    if not seen_header:
        raise ModelError("empty model")
    spec = ModelSpec(players, states, trans, rewards, atoms)
    _check_spec(spec, n_players)
    return spec


def _check_spec(spec: ModelSpec, n_players: int | None) -> None:
    if not spec.players or n_players == 0:
        raise ModelError("at least one player required")
    if n_players is not None and n_players != len(spec.players):
        raise ModelError(f"header declares {n_players} players but {len(spec.players)} are defined")
    owner: dict[str, str] = {}
    names = set()
    for p in spec.players:
        if p.name in names:
            raise ModelError(f"duplicate player {p.name!r}", p.line)
        names.add(p.name)
        for a in p.actions:
            if a == IDLE:
                raise ModelError("'-' is reserved for the idle action", p.line)
            if a in owner:
                raise ModelError(f"action {a!r} declared for both {owner[a]} and {p.name}", p.line)
            owner[a] = p.name
    if not spec.states:
        raise ModelError("at least one state required")
    state_names = set()
    for s in spec.states:
        if s.name in state_names:
            raise ModelError(f"duplicate state {s.name!r}", s.line)
        state_names.add(s.name)
    if not any(s.init for s in spec.states):
        raise ModelError("no initial state declared")

    def check_joint(joint, line, allow_star=False):
        if allow_star and joint == ("*",):
            return
        if len(joint) != len(spec.players):
            raise ModelError(f"joint action {_fmt_joint(joint)} has {len(joint)} entries, "
                             f"expected {len(spec.players)}", line)
        for p, a in zip(spec.players, joint):
            if a != IDLE and a not in p.actions:
                raise ModelError(f"undeclared action {a!r} for player {p.name}", line)

    seen = set()
    for t in spec.transitions:
        if t.state not in state_names:
            raise ModelError(f"undeclared state {t.state!r}", t.line)
        check_joint(t.joint, t.line)
        if (t.state, t.joint) in seen:
            raise ModelError(f"duplicate transition for {_fmt_joint(t.joint)} at state {t.state}", t.line)
        seen.add((t.state, t.joint))
        total = 0.0
        for _, p, target in t.outcomes:
            if target not in state_names:
                raise ModelError(f"undeclared state {target!r}", t.line)
            if p < 0:
                raise ModelError(f"negative probability {float(p)} at state {t.state}", t.line)
            total += float(p)
        if abs(total - 1.0) > DIST_TOL:
            raise ModelError(f"distribution sums to {total:.12g} at state {t.state}", t.line)
    for r in spec.rewards:
        if r.state != "*" and r.state not in state_names:
            raise ModelError(f"undeclared state {r.state!r}", r.line)
        if r.joint is not None:
            check_joint(r.joint, r.line, allow_star=True)


def _fmt_joint(joint) -> str:
    return "*" if joint == ("*",) else "(" + ",".join(joint) + ")"


def format_model(spec: ModelSpec) -> str:
    """Canonical text of a model."""
    out = ["csg", f"players {len(spec.players)}"]
    for p in spec.players:
        out.append(f"player {p.name} actions " + " ".join(p.actions))
    if spec.atoms:
        out.append("atoms " + " ".join(spec.atoms))
    for s in spec.states:
        out.append(f"state {s.name}" + (" init" if s.init else "") + " labels {" + ", ".join(s.labels) + "}")
    for t in spec.transitions:
        dist = " + ".join(f"{_fmt_num(p)}:{target}" for _, p, target in t.outcomes)
        out.append(f"trans {t.state} {_fmt_joint(t.joint)} -> {dist}")
    for r in spec.rewards:
        if r.kind == "state":
            out.append(f"reward {r.name} state {r.state} = {_fmt_num(r.value)}")
        else:
            out.append(f"reward {r.name} act {r.state} {_fmt_joint(r.joint)} = {_fmt_num(r.value)}")
    return "\n".join(out) + "\n"


def _fmt_num(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


_PARAM_RE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def substitute(text: str, params: dict[str, object]) -> str:
    """Replace ``${name}`` occurrences; unknown names are an error."""
    def rep(m):
        if m.group(1) not in params:
            raise ModelError(f"no value given for parameter ${{{m.group(1)}}}")
        return str(params[m.group(1)])
    return _PARAM_RE.sub(rep, text)
