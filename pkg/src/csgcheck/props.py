"""Property language: AST, parser, canonical printer, normalisation, validation.

Grammar (state formulas)::

    phi := true | false | "atom" | !phi | phi & phi | phi | phi | (phi)
         | <<C>> P~q [ path ]        | <<C>> Pmax=? [ path ]   | <<C>> Pmin=? [ path ]
         | <<C>> R{"r"}~x [ rew ]     | <<C>> R{"r"}max=? [ rew ] | R{"r"}min=?
         | <<C:D>> max~x ( obj + obj ) | <<C:D>> max=? ( obj + obj ) | min...
    path := X phi | phi U phi | phi U<=k phi | F phi | F<=k phi | G phi | G<=k phi
    rew  := I=k | C<=k | F phi
    obj  := P[ path ] | R{"r"}[ rew ]
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Union


class PropertyError(ValueError):
    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        super().__init__(f"{message} (at column {pos + 1})" if pos is not None else message)


# --- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Not:
    arg: "StateFormula"


@dataclass(frozen=True)
class And:
    left: "StateFormula"
    right: "StateFormula"


@dataclass(frozen=True)
class Next:
    arg: "StateFormula"


@dataclass(frozen=True)
class Until:
    left: "StateFormula"
    right: "StateFormula"
    bound: int | None = None


@dataclass(frozen=True)
class Eventually:
    arg: "StateFormula"
    bound: int | None = None


@dataclass(frozen=True)
class Globally:
    arg: "StateFormula"
    bound: int | None = None


@dataclass(frozen=True)
class Instant:
    k: int


@dataclass(frozen=True)
class Cumul:
    k: int


@dataclass(frozen=True)
class Reach:
    arg: "StateFormula"


@dataclass(frozen=True)
class PObj:
    path: "PathFormula"
    negated: bool = False


@dataclass(frozen=True)
class RObj:
    reward: str
    rho: "RewardFormula"


@dataclass(frozen=True)
class ProbOp:
    """Zero-sum probability operator.

    Exactly one of ``rel``/``query`` is set. ``negated`` marks a query whose
    value is one minus the value of ``path`` (produced by normalisation).
    """
    coalition: tuple[str, ...]
    path: "PathFormula"
    rel: str | None = None
    threshold: float | None = None
    query: str | None = None
    negated: bool = False


@dataclass(frozen=True)
class RewOp:
    coalition: tuple[str, ...]
    reward: str
    rho: "RewardFormula"
    rel: str | None = None
    threshold: float | None = None
    query: str | None = None


@dataclass(frozen=True)
class NashOp:
    """Equilibrium operator over the split ``coalition : others``.

    ``negated`` marks a query whose value pair is one minus the computed
    pair (both objectives were globally-formulas, see :func:`normalize`).
    """
    coalition: tuple[str, ...]
    others: tuple[str, ...]
    opt: str
    objectives: tuple[Union[PObj, RObj], Union[PObj, RObj]]
    rel: str | None = None
    threshold: float | None = None
    negated: bool = False

    @property
    def is_query(self) -> bool:
        return self.rel is None


StateFormula = Union[TrueF, Atom, Not, And, ProbOp, RewOp, NashOp]
PathFormula = Union[Next, Until, Eventually, Globally]
RewardFormula = Union[Instant, Cumul, Reach]


def is_query(f) -> bool:
    return isinstance(f, (ProbOp, RewOp, NashOp)) and f.rel is None


# --- tokenizer ------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<str>"[^"]*")
  | (?P<num>\d+/\d+|(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><<|>>|<=|>=|=\?|[<>=!&|:,\[\](){}+-])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise PropertyError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            out.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    out.append(_Tok("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind != "str":
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind == "str":
            raise PropertyError(f"expected {text!r} but found {self.tok.text or 'end of input'!r}", self.tok.pos)
        return self.next()

    def error(self, what: str):
        raise PropertyError(f"expected {what} but found {self.tok.text or 'end of input'!r}", self.tok.pos)

    def number(self) -> float:
        neg = self.accept("-")
        t = self.tok
        if t.kind != "num":
            self.error("a number")
        self.next()
        if "/" in t.text:
            a, b = t.text.split("/")
            v = int(a) / int(b)
        else:
            v = float(t.text)
        return -v if neg else v

    def integer(self) -> int:
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            self.error("a non-negative integer step bound")
        self.next()
        return int(t.text)

    # state formulas
    def state(self):
        left = self.conj()
        while self.accept("|"):
            right = self.conj()
            left = Not(And(Not(left), Not(right)))
        return left

    def conj(self):
        left = self.unary()
        while self.accept("&"):
            left = And(left, self.unary())
        return left

    def unary(self):
        if self.accept("!"):
            return Not(self.unary())
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "str":
            self.next()
            return Atom(t.text[1:-1])
        if t.kind == "ident" and t.text == "true":
            self.next()
            return TrueF()
        if t.kind == "ident" and t.text == "false":
            self.next()
            return Not(TrueF())
        if self.accept("("):
            f = self.state()
            self.expect(")")
            return f
        if self.accept("<<"):
            return self.operator()
        self.error("a state formula")

    def names(self, stop: tuple[str, ...]) -> tuple[str, ...]:
        out = []
        while self.tok.text not in stop:
            t = self.next()
            if t.kind not in ("ident", "num"):
                raise PropertyError(f"expected a player name but found {t.text!r}", t.pos)
            out.append(t.text)
            if not self.accept(","):
                break
        return tuple(out)

    def relation(self):
        t = self.tok
        if t.text in ("<", "<=", ">=", ">"):
            self.next()
            return t.text, self.number()
        self.error("a relation (<, <=, >=, >) or '=?'")

    def operator(self):
        start = self.tok.pos
        coal = self.names((">>", ":"))
        if self.accept(":"):
            others = self.names((">>",))
            self.expect(">>")
            return self.nash(coal, others, start)
        self.expect(">>")
        t = self.next()
        if t.text in ("Pmax", "Pmin"):
            self.expect("=?")
            return ProbOp(coal, self.bracket_path(), query=t.text[1:])
        if t.text == "P":
            rel, x = self.relation()
            if not 0.0 <= x <= 1.0:
                raise PropertyError(f"probability threshold {x} outside [0, 1]", t.pos)
            return ProbOp(coal, self.bracket_path(), rel, x)
        if t.text in ("R", "Rmax", "Rmin"):
            if t.text != "R":
                raise PropertyError("reward operators need a structure name: R{\"name\"}", t.pos)
            name = self.reward_name()
            if self.tok.text in ("max", "min"):
                q = self.next().text
                self.expect("=?")
                return RewOp(coal, name, self.bracket_rho(), query=q)
            rel, x = self.relation()
            return RewOp(coal, name, self.bracket_rho(), rel, x)
        raise PropertyError(f"expected P, Pmax, Pmin or R after coalition but found {t.text!r}", t.pos)

    def nash(self, coal, others, start):
        t = self.next()
        if t.text not in ("max", "min"):
            raise PropertyError(f"expected 'max' or 'min' but found {t.text!r}", t.pos)
        rel = x = None
        if not self.accept("=?"):
            rel, x = self.relation()
        self.expect("(")
        a = self.objective()
        self.expect("+")
        b = self.objective()
        self.expect(")")
        f = NashOp(coal, others, t.text, (a, b), rel, x)
        if isinstance(a, PObj) != isinstance(b, PObj):
            raise PropertyError("equilibrium objectives must be both probabilities or both rewards", start)
        if set(coal) & set(others) or not coal or not others:
            raise PropertyError("the two coalitions of an equilibrium operator must be non-empty and disjoint", start)
        return f

    def objective(self):
        t = self.next()
        if t.text == "P":
            return PObj(self.bracket_path())
        if t.text == "R":
            name = self.reward_name()
            return RObj(name, self.bracket_rho())
        raise PropertyError(f"expected P[...] or R{{...}}[...] but found {t.text!r}", t.pos)

    def reward_name(self) -> str:
        self.expect("{")
        t = self.next()
        if t.kind != "str":
            raise PropertyError("reward structure names are quoted strings", t.pos)
        self.expect("}")
        return t.text[1:-1]

    def bracket_path(self):
        self.expect("[")
        p = self.path()
        self.expect("]")
        return p

    def bracket_rho(self):
        self.expect("[")
        t = self.tok
        if t.text == "I":
            self.next()
            self.expect("=")
            r = Instant(self.integer())
        elif t.text == "C":
            self.next()
            self.expect("<=")
            r = Cumul(self.integer())
        elif t.text == "F":
            self.next()
            r = Reach(self.state())
        else:
            self.error("I=k, C<=k or F phi")
        self.expect("]")
        return r

    def bound(self):
        if self.accept("<="):
            return self.integer()
        return None

    def path(self):
        t = self.tok
        if t.kind == "ident" and t.text in ("X", "F", "G"):
            self.next()
            if t.text == "X":
                return Next(self.state())
            k = self.bound()
            arg = self.state()
            return Eventually(arg, k) if t.text == "F" else Globally(arg, k)
        left = self.state()
        if not (self.tok.kind == "ident" and self.tok.text == "U"):
            self.error("'U' in path formula")
        self.next()
        k = self.bound()
        return Until(left, self.state(), k)


def parse_property(text: str) -> StateFormula:
    """Parse one property string."""
    p = _Parser(text)
    f = p.state()
    if p.tok.kind != "eof":
        p.error("end of property")
    return f


def parse_properties(text: str) -> list[str]:
    """Split a properties file: one property per line, ``//`` or ``#`` comments."""
    out = []
    for line in text.splitlines():
        line = re.split(r"//|#", line, 1)[0].strip()
        if line:
            out.append(line)
    return out


# --- printer -------------------------------------------------------------

def _num(x: float) -> str:
    return repr(float(x)).rstrip("0").rstrip(".") if x != int(x) else str(int(x))


def _coal(c) -> str:
    return ",".join(c)


def _state_str(f, top=True) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, Atom):
        return f'"{f.name}"'
    if isinstance(f, Not):
        if isinstance(f.arg, TrueF):
            return "false"
        return "!" + _state_str(f.arg, False)
    if isinstance(f, And):
        s = f"{_state_str(f.left, False)} & {_state_str(f.right, False)}"
        return s if top else f"({s})"
    if isinstance(f, ProbOp):
        # a negated query prints as the globally-query it came from
        q = {"max": "min", "min": "max"}[f.query] if f.negated else f.query
        head = f"P{f.rel}{_num(f.threshold)}" if f.rel else f"P{q}=?"
        s = f"<<{_coal(f.coalition)}>> {head} [ {_path_str(f.path, f.negated)} ]"
    elif isinstance(f, RewOp):
        head = f"{f.rel}{_num(f.threshold)}" if f.rel else f"{f.query}=?"
        s = f'<<{_coal(f.coalition)}>> R{{"{f.reward}"}}{head} [ {_rho_str(f.rho)} ]'
    elif isinstance(f, NashOp):
        opt = {"max": "min", "min": "max"}[f.opt] if f.negated else f.opt
        head = f"{opt}{f.rel}{_num(f.threshold)}" if f.rel else f"{opt}=?"
        objs = " + ".join(_obj_str(o, f.negated) for o in f.objectives)
        s = f"<<{_coal(f.coalition)}:{_coal(f.others)}>> {head} ( {objs} )"
    else:
        raise TypeError(f"not a state formula: {f!r}")
    return s if top else f"({s})"


def _path_str(p, negated=False) -> str:
    if negated:
        # only produced by normalising G: negated true U !phi
        if isinstance(p, Until) and isinstance(p.left, TrueF) and isinstance(p.right, Not):
            b = f"<={p.bound}" if p.bound is not None else ""
            return f"G{b} {_state_str(p.right.arg, False)}"
        raise TypeError("cannot print a negated path formula")
    if isinstance(p, Next):
        return f"X {_state_str(p.arg, False)}"
    if isinstance(p, Until):
        b = f"<={p.bound}" if p.bound is not None else ""
        return f"{_state_str(p.left, False)} U{b} {_state_str(p.right, False)}"
    if isinstance(p, (Eventually, Globally)):
        b = f"<={p.bound}" if p.bound is not None else ""
        return f"{'F' if isinstance(p, Eventually) else 'G'}{b} {_state_str(p.arg, False)}"
    raise TypeError(f"not a path formula: {p!r}")


def _rho_str(r) -> str:
    if isinstance(r, Instant):
        return f"I={r.k}"
    if isinstance(r, Cumul):
        return f"C<={r.k}"
    return f"F {_state_str(r.arg, False)}"


def _obj_str(o, negated=False) -> str:
    if isinstance(o, PObj):
        return f"P[ {_path_str(o.path, o.negated or negated)} ]"
    return f'R{{"{o.reward}"}}[ {_rho_str(o.rho)} ]'


def format_property(f) -> str:
    """Canonical text of a state formula."""
    return _state_str(f)


# --- normalisation -------------------------------------------------------

_FLIP = {">=": "<=", ">": "<", "<=": ">=", "<": ">"}


def _norm_path(p):
    """Return ``(path, negated)`` with only Next/Until left."""
    if isinstance(p, Next):
        return Next(normalize(p.arg)), False
    if isinstance(p, Until):
        return Until(normalize(p.left), normalize(p.right), p.bound), False
    if isinstance(p, Eventually):
        return Until(TrueF(), normalize(p.arg), p.bound), False
    if isinstance(p, Globally):
        return Until(TrueF(), Not(normalize(p.arg)), p.bound), True
    raise TypeError(f"not a path formula: {p!r}")


def _norm_rho(r):
    return Reach(normalize(r.arg)) if isinstance(r, Reach) else r


def normalize(f):
    """Rewrite F and G into until form, pushing G's negation into thresholds."""
    if isinstance(f, (TrueF, Atom)):
        return f
    if isinstance(f, Not):
        inner = normalize(f.arg)
        return inner.arg if isinstance(inner, Not) else Not(inner)
    if isinstance(f, And):
        return And(normalize(f.left), normalize(f.right))
    if isinstance(f, ProbOp):
        if f.negated:
            return f
        path, neg = _norm_path(f.path)
        if not neg:
            return replace(f, path=path)
        if f.rel is not None:
            return replace(f, path=path, rel=_FLIP[f.rel], threshold=round(1.0 - f.threshold, 12))
        return replace(f, path=path, query="min" if f.query == "max" else "max", negated=True)
    if isinstance(f, RewOp):
        return replace(f, rho=_norm_rho(f.rho))
    if isinstance(f, NashOp):
        if f.negated:
            return f
        objs, negs = [], []
        for o in f.objectives:
            if isinstance(o, PObj):
                path, neg = _norm_path(o.path)
                objs.append(PObj(path))
                negs.append(neg)
            else:
                objs.append(RObj(o.reward, _norm_rho(o.rho)))
                negs.append(False)
        if negs[0] != negs[1]:
            raise PropertyError("unsupported: an equilibrium operator mixing a G objective with a non-G objective")
        g = replace(f, objectives=tuple(objs))
        if not negs[0]:
            return g
        opt = "min" if f.opt == "max" else "max"
        if f.rel is not None:
            return replace(g, opt=opt, rel=_FLIP[f.rel], threshold=round(2.0 - f.threshold, 12))
        return replace(g, opt=opt, negated=True)
    raise TypeError(f"not a state formula: {f!r}")


# --- validation ----------------------------------------------------------

def _walk_state(f):
    yield f
    if isinstance(f, Not):
        yield from _walk_state(f.arg)
    elif isinstance(f, And):
        yield from _walk_state(f.left)
        yield from _walk_state(f.right)
    elif isinstance(f, ProbOp):
        yield from _walk_path(f.path)
    elif isinstance(f, RewOp):
        yield from _walk_rho(f.rho)
    elif isinstance(f, NashOp):
        for o in f.objectives:
            if isinstance(o, PObj):
                yield from _walk_path(o.path)
            else:
                yield from _walk_rho(o.rho)


def _walk_path(p):
    for attr in ("arg", "left", "right"):
        if hasattr(p, attr):
            yield from _walk_state(getattr(p, attr))


def _walk_rho(r):
    if isinstance(r, Reach):
        yield from _walk_state(r.arg)


def subformulas(f):
    """All state subformulas of ``f``, outermost first."""
    return list(_walk_state(f))


def validate(game, f):
    """Check atoms, reward names and coalitions of ``f`` against ``game``.

    ``game`` is a :class:`~csgcheck.game.Csg`. Returns ``f`` unchanged.
    """
    players = set(game.players)
    for g in _walk_state(f):
        if isinstance(g, Atom) and g.name not in game.atoms:
            raise PropertyError(f"unknown atom {g.name!r}")
        if isinstance(g, (ProbOp, RewOp, NashOp)):
            for p in g.coalition + (g.others if isinstance(g, NashOp) else ()):
                if p not in players:
                    raise PropertyError(f"unknown player {p!r}")
            if g is not f and is_query(g):
                raise PropertyError("numerical queries may only appear at the top level")
        if isinstance(g, RewOp) and g.reward not in game.rewards:
            raise PropertyError(f"unknown reward structure {g.reward!r}")
        if isinstance(g, NashOp):
            if set(g.coalition) | set(g.others) != players or set(g.coalition) & set(g.others):
                raise PropertyError("the coalitions of an equilibrium operator must partition the players "
                                    f"{sorted(players)}")
            for o in g.objectives:
                if isinstance(o, RObj) and o.reward not in game.rewards:
                    raise PropertyError(f"unknown reward structure {o.reward!r}")
    return f
