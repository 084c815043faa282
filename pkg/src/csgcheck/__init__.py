"""Equilibria-based model checking of concurrent stochastic games."""

from .bimatrix import enumerate_ne, scne, swne
from .checker import AssumptionError, CheckResult, Checker, Options, check
from .game import Csg, coalition_game, load_model
from .matrix import solve_matrix_game
from .modelfile import ModelError, parse_model
from .nonzero import NonzeroError, nz_solve
from .props import PropertyError, parse_property
from .strategy import assemble, certify_epsilon, evaluate_profile, export_profile
from .zerosum import zs_solve

__all__ = [
    "AssumptionError", "CheckResult", "Checker", "Csg", "ModelError", "NonzeroError", "Options",
    "PropertyError", "assemble", "certify_epsilon", "check", "coalition_game", "enumerate_ne",
    "evaluate_profile", "export_profile", "load_model", "nz_solve", "parse_model", "parse_property",
    "scne", "solve_matrix_game", "swne", "zs_solve",
]
