"""Objectives with their state sets already computed.

These are what the numerical engines work on: the checker turns path and
reward formulas into one of these after evaluating the operands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class NextObj:
    sat: np.ndarray

    finite = True


@dataclass(frozen=True, eq=False)
class UntilObj:
    sat1: np.ndarray
    sat2: np.ndarray
    bound: int | None = None

    @property
    def finite(self) -> bool:
        return self.bound is not None


@dataclass(frozen=True, eq=False)
class InstObj:
    reward: str
    k: int

    finite = True


@dataclass(frozen=True, eq=False)
class CumulObj:
    reward: str
    k: int

    finite = True


@dataclass(frozen=True, eq=False)
class ReachRewObj:
    reward: str
    target: np.ndarray

    finite = False


Objective = NextObj | UntilObj | InstObj | CumulObj | ReachRewObj


def horizon(obj) -> int | None:
    """Step bound of a finite-horizon objective (Next counts as one step)."""
    if isinstance(obj, NextObj):
        return 1
    if isinstance(obj, UntilObj):
        return obj.bound
    if isinstance(obj, (InstObj, CumulObj)):
        return obj.k
    return None


def is_probabilistic(obj) -> bool:
    return isinstance(obj, (NextObj, UntilObj))
