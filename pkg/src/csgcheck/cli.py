"""``csg-check``: verify rPATL properties with equilibria on a CSG model file."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checker import AssumptionError, Checker, Options
from .game import load_model
from .mdp import EPS_VI, MAX_ITERS
from .modelfile import ModelError, substitute
from .nonzero import NonzeroError
from .props import PropertyError, format_property, parse_properties
from .strategy import assemble, best_response_values, certify_epsilon, export_profile

log = logging.getLogger("csgcheck")

RESULT_FIELDS = ["property", "params", "state", "value1", "value2", "sat", "iterations", "converged", "epsilon"]
EXPORT_SUFFIX = {"graph": ".dot", "table": ".csv"}


@dataclass
class RunConfig:
    model: Path
    properties: list[str]
    eps: float = EPS_VI
    gamma: float | None = None
    max_iters: int = MAX_ITERS
    workers: int = 1
    force: bool = False
    synth: bool = False
    export: str = "graph"
    out: Path = Path(".")
    sweep: list[tuple[str, list[str]]] = field(default_factory=list)
    all_states: bool = False

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("--epsilon must be positive")
        if self.workers < 1:
            raise ValueError("--workers must be at least 1")


def parse_sweep(text: str) -> tuple[str, list[str]]:
    """``k=1..10`` (inclusive integer range) or ``q=0.1,0.2``."""
    name, sep, spec = text.partition("=")
    name = name.strip()
    if not sep or not name or not spec.strip():
        raise ValueError(f"bad sweep {text!r}; expected NAME=a..b or NAME=v1,v2,...")
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        try:
            a, b = int(lo), int(hi)
        except ValueError:
            raise ValueError(f"sweep range {spec!r} needs integer bounds") from None
        step = 1 if b >= a else -1
        return name, [str(v) for v in range(a, b + step, step)]
    return name, [v.strip() for v in spec.split(",") if v.strip()]


def sweep_points(sweep):
    if not sweep:
        return [{}]
    names = [n for n, _ in sweep]
    return [dict(zip(names, vals)) for vals in itertools.product(*(v for _, v in sweep))]


def _num(v: float) -> str:
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _zero_sum_gap(res, s: int) -> float:
    """How much the opponent can beat the reported value against player 1's strategy."""
    g, prof, obj = res.game, assemble(res), res.objectives[0]
    worst = "min" if res.opt == "max" else "max"
    br, nodes, index = best_response_values(g, prof, obj, 1, worst)
    got = br[index[prof.initial_node(s)]]
    v = res.engine.values[s]
    if np.isinf(v) and np.isinf(got):
        return 0.0
    return max(0.0, float(v - got) if res.opt == "max" else float(got - v))


def _slug(params: dict) -> str:
    return "_".join(f"{k}{v}" for k, v in params.items())


class Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.rows: list[dict] = []
        self.violated = False
        cfg.out.mkdir(parents=True, exist_ok=True)
        self._log = open(cfg.out / "diagnostics.log", "w", encoding="utf-8", newline="\n")

    def note(self, **entry):
        self._log.write(json.dumps(entry, sort_keys=True) + "\n")

    def close(self):
        self._log.close()

    def write_results(self):
        with open(self.cfg.out / "results.csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.DictWriter(fh, RESULT_FIELDS, lineterminator="\n")
            w.writeheader()
            w.writerows(self.rows)

    def point(self, text: str, params: dict):
        cfg = self.cfg
        g = load_model(text, params)
        opts = Options(eps=cfg.eps, gamma=cfg.gamma, max_iters=cfg.max_iters, workers=cfg.workers,
                       force=cfg.force, synth=cfg.synth, all_states=cfg.all_states)
        checker = Checker(g, opts)
        ptag = ";".join(f"{k}={v}" for k, v in params.items())
        for pi, prop in enumerate(cfg.properties):
            # properties take the same ${NAME} parameters as the model
            prop = substitute(prop, params)
            t0 = time.perf_counter()
            try:
                res = checker.check(prop)
            except (PropertyError, AssumptionError, NonzeroError) as e:
                raise RuntimeError(f"property {pi + 1} ({prop}): {e}") from None
            wall = time.perf_counter() - t0
            shown = format_property(res.formula)
            cert = self._certify(res, g.initial) if cfg.synth and res.engine is not None else {}
            for s in g.initial:
                row = {"property": shown, "params": ptag, "state": g.state_names[s],
                       "value1": "", "value2": "", "sat": "", "iterations": res.iterations,
                       "converged": str(res.converged).lower(), "epsilon": ""}
                if res.values is not None:
                    vals = np.atleast_1d(res.values[s])
                    row["value1"] = _num(vals[0])
                    if vals.size > 1:
                        row["value2"] = _num(vals[1])
                if res.sat is not None:
                    row["sat"] = str(bool(res.sat[s])).lower()
                    self.violated |= not res.sat[s]
                if s in cert:
                    row["epsilon"] = _num(cert[s])
                self.rows.append(row)
            self.note(kind="result", property=shown, params=params, wall_time=wall,
                      iterations=res.iterations, converged=res.converged)
            for d in res.diagnostics:
                self.note(property=shown, params=params, **d)
                log.warning("%s: %s", shown, d.get("message", d.get("kind")))
            if cfg.synth and res.engine is not None:
                prof = assemble(res)
                name = f"strategy_p{pi + 1}" + (f"_{_slug(params)}" if params else "")
                path = cfg.out / (name + EXPORT_SUFFIX[cfg.export])
                path.write_text(export_profile(prof, cfg.export), encoding="utf-8", newline="\n")
                self.note(kind="strategy", property=shown, params=params, file=path.name)

    def _certify(self, res, initial) -> dict[int, float]:
        if res.kind == "pair" or (res.objectives is not None and len(res.objectives) == 2):
            eng = res.engine
            g = eng.augmented.game if eng.augmented is not None else res.game
            objs = eng.objectives if eng.augmented is not None else res.objectives
            c = certify_epsilon(g, objs, assemble(res), res.opt)
            return {s: c.epsilon for s in initial}
        return {s: _zero_sum_gap(res, s) for s in initial}


def run(cfg: RunConfig) -> int:
    try:
        text = cfg.model.read_text(encoding="utf-8")
    except OSError as e:
        print(f"csg-check: cannot read model: {e}", file=sys.stderr)
        return 2
    r = Run(cfg)
    try:
        for params in sweep_points(cfg.sweep):
            r.point(text, params)
    except ModelError as e:
        print(f"csg-check: {cfg.model}: {e}", file=sys.stderr)
        r.note(kind="error", message=str(e))
        return 2
    except (RuntimeError, ValueError) as e:
        print(f"csg-check: {e}", file=sys.stderr)
        r.note(kind="error", message=str(e))
        return 2
    finally:
        r.write_results()
        r.close()
    return 1 if r.violated else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csg-check", description=__doc__)
    p.add_argument("model", type=Path, help="model file")
    p.add_argument("-p", "--property", action="append", default=[], help="property (repeatable)")
    p.add_argument("--props-file", type=Path, help="file with one property per line")
    p.add_argument("--epsilon", type=float, default=EPS_VI, help="value-iteration convergence threshold")
    p.add_argument("--gamma", type=float, help="lifting value for zero rewards when minimising")
    p.add_argument("--max-iters", type=int, default=MAX_ITERS)
    p.add_argument("--workers", type=int, default=int(os.environ.get("CSG_CHECK_WORKERS", "1")))
    p.add_argument("--force", action="store_true", help="iterate even if a convergence assumption fails")
    p.add_argument("--synth", action="store_true", help="synthesise, certify and export strategies")
    p.add_argument("--export", choices=sorted(EXPORT_SUFFIX), default="graph")
    p.add_argument("--sweep", action="append", default=[], metavar="NAME=a..b|list",
                   help="substitute ${NAME} in the model and properties with each value (repeatable)")
    p.add_argument("--all-states", action="store_true", help="also iterate states unreachable from the initial ones")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        props = list(args.property)
        if args.props_file:
            props += parse_properties(args.props_file.read_text(encoding="utf-8"))
        if not props:
            raise ValueError("no properties given; use -p or --props-file")
        cfg = RunConfig(args.model, props, args.epsilon, args.gamma, args.max_iters, args.workers, args.force,
                        args.synth, args.export, args.out, [parse_sweep(s) for s in args.sweep],
                        args.all_states)
    except (OSError, ValueError) as e:
        print(f"csg-check: {e}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
