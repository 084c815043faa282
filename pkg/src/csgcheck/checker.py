"""Bottom-up evaluation of rPATL formulae with equilibrium operators."""

from __future__ import annotations

import operator
from dataclasses import dataclass, field

import numpy as np

from .game import Csg, coalition_game
from .mdp import EPS_VI, MAX_ITERS
from .nonzero import nz_solve
from .objectives import CumulObj, InstObj, NextObj, ReachRewObj, UntilObj, horizon
from .props import (And, Atom, Cumul, Instant, NashOp, Next, Not, PObj, ProbOp, Reach, RewOp, TrueF,
                    Until, normalize, parse_property, validate)
from .qualitative import check_reward_loops, check_unavoidable
from .zerosum import zs_solve

_REL = {">=": operator.ge, ">": operator.gt, "<=": operator.le, "<": operator.lt}


class AssumptionError(RuntimeError):
    """A convergence assumption fails and ``force`` was not given."""

    def __init__(self, report):
        super().__init__(f"{report}; rerun with --force to iterate anyway (values may oscillate)")
        self.report = report


@dataclass
class Options:
    eps: float = EPS_VI
    gamma: float | None = None
    max_iters: int = MAX_ITERS
    workers: int = 1
    force: bool = False
    synth: bool = False
    all_states: bool = False


@dataclass
class CheckResult:
    """Outcome of checking one property.

    ``kind`` is ``"sat"`` for threshold properties (``sat`` set), ``"value"``
    for zero-sum queries and ``"pair"`` for equilibrium queries (``values``
    of shape ``(n, 2)``). ``engine`` and ``game`` are the top-level
    operator's numerical result and coalition game, used for synthesis.
    """
    formula: object
    kind: str
    sat: np.ndarray | None = None
    values: np.ndarray | None = None
    iterations: int = 0
    converged: bool = True
    diagnostics: list[dict] = field(default_factory=list)
    engine: object = None
    game: object = None
    objectives: tuple | None = None
    opt: str | None = None
    negated: bool = False


class Checker:
    def __init__(self, g: Csg, options: Options | None = None):
        self.g = g
        self.opts = options or Options()
        self._games: dict = {}
        self.diagnostics: list[dict] = []
        self.iterations = 0
        self.converged = True

    # -- helpers --

    def game(self, coalition, proper: bool = False):
        key = (tuple(sorted(coalition)), proper)
        if key not in self._games:
            self._games[key] = coalition_game(self.g, coalition, allow_trivial=not proper)
        return self._games[key]

    def _note(self, res):
        self.iterations += res.iterations
        self.converged &= res.converged
        self.diagnostics.extend(res.diagnostics)

    def _assumption(self, report):
        if report.ok:
            return
        if not self.opts.force:
            raise AssumptionError(report)
        self.diagnostics.append({"kind": "assumption", "name": report.name, "states": report.violations,
                                 "message": f"{report}; forced, values may oscillate"})

    def objective(self, path_or_rho, reward: str | None = None):
        if isinstance(path_or_rho, Next):
            return NextObj(self.sat(path_or_rho.arg))
        if isinstance(path_or_rho, Until):
            return UntilObj(self.sat(path_or_rho.left), self.sat(path_or_rho.right), path_or_rho.bound)
        if isinstance(path_or_rho, Instant):
            return InstObj(reward, path_or_rho.k)
        if isinstance(path_or_rho, Cumul):
            return CumulObj(reward, path_or_rho.k)
        if isinstance(path_or_rho, Reach):
            return ReachRewObj(reward, self.sat(path_or_rho.arg))
        raise TypeError(f"unsupported objective {path_or_rho!r}")

    def _kw(self, synth: bool):
        o = self.opts
        return {"eps": o.eps, "max_iters": o.max_iters, "gamma": o.gamma, "synth": synth,
                "reachable_only": not o.all_states}

    # -- evaluation --

    def sat(self, f) -> np.ndarray:
        if isinstance(f, TrueF):
            return np.ones(self.g.n, dtype=bool)
        if isinstance(f, Atom):
            return self.g.sat_atom(f.name)
        if isinstance(f, Not):
            return ~self.sat(f.arg)
        if isinstance(f, And):
            return self.sat(f.left) & self.sat(f.right)
        if isinstance(f, (ProbOp, RewOp)):
            values, _ = self.zero_sum(f)
            return _REL[f.rel](values, f.threshold)
        if isinstance(f, NashOp):
            res = self.nash(f)
            return _REL[f.rel](res.values.sum(axis=1), f.threshold)
        raise TypeError(f"not a state formula: {f!r}")

    def zero_sum(self, f, synth: bool = False):
        if f.rel is not None:
            opt = "max" if f.rel in (">=", ">") else "min"
        else:
            opt = f.query
        cg = self.game(f.coalition)
        if isinstance(f, ProbOp):
            obj = self.objective(f.path)
        else:
            obj = self.objective(f.rho, f.reward)
            if isinstance(obj, ReachRewObj):
                self._assumption(check_reward_loops(cg, f.reward, obj.target))
        res = zs_solve(cg, obj, opt, **self._kw(synth))
        self._note(res)
        values = res.values
        if isinstance(f, ProbOp) and f.negated:
            values = 1.0 - values
        return values, (res, cg, (obj,), opt)

    def nash(self, f, synth: bool = False):
        cg = self.game(f.coalition, proper=True)
        objs = tuple(self.objective(o.path) if isinstance(o, PObj) else self.objective(o.rho, o.reward)
                     for o in f.objectives)
        for i, obj in enumerate(objs):
            if horizon(obj) is not None:
                continue
            if isinstance(obj, UntilObj):
                self._assumption(check_unavoidable(cg, [~obj.sat1 | obj.sat2], name="unavoidable targets"))
            else:
                self._assumption(check_unavoidable(cg, [obj.target], name="unavoidable reward targets"))
        kw = self._kw(synth)
        kw["workers"] = self.opts.workers
        res = nz_solve(cg, *objs, f.opt, **kw)
        self._note(res)
        res.game = cg
        return res

    def check(self, f) -> CheckResult:
        if isinstance(f, str):
            f = parse_property(f)
        f = normalize(validate(self.g, f))
        self.diagnostics, self.iterations, self.converged = [], 0, True
        synth = self.opts.synth
        if isinstance(f, (ProbOp, RewOp)) and f.rel is None:
            values, (res, cg, objs, opt) = self.zero_sum(f, synth)
            kind, out = "value", dict(values=values, engine=res, game=cg, objectives=objs, opt=opt,
                                       negated=isinstance(f, ProbOp) and f.negated)
        elif isinstance(f, NashOp) and f.rel is None:
            res = self.nash(f, synth)
            values = 1.0 - res.values if f.negated else res.values
            kind, out = "pair", dict(values=values, engine=res, game=res.game, objectives=res.objectives,
                                      opt=f.opt, negated=f.negated)
        elif synth and isinstance(f, (ProbOp, RewOp)):
            values, (res, cg, objs, opt) = self.zero_sum(f, True)
            kind, out = "sat", dict(sat=_REL[f.rel](values, f.threshold), values=values, engine=res, game=cg,
                                     objectives=objs, opt=opt, negated=isinstance(f, ProbOp) and f.negated)
        elif synth and isinstance(f, NashOp):
            res = self.nash(f, True)
            kind, out = "sat", dict(sat=_REL[f.rel](res.values.sum(axis=1), f.threshold), values=res.values,
                                     engine=res, game=res.game, objectives=res.objectives, opt=f.opt,
                                     negated=f.negated)
        else:
            kind, out = "sat", dict(sat=self.sat(f))
        return CheckResult(f, kind, iterations=self.iterations, converged=self.converged,
                           diagnostics=list(self.diagnostics), **out)


def check(g: Csg, f, **options) -> CheckResult:
    """Check one property (text or parsed) on ``g``."""
    return Checker(g, Options(**options)).check(f)
