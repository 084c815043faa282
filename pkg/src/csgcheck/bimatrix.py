"""Nash equilibria of bimatrix games and social-welfare/social-cost selection.

Equilibria are found as completely labelled vertex pairs of the two best
response polytopes

    P = {x >= 0 : B^T x <= 1}      Q = {y >= 0 : A y <= 1}

after shifting both payoff matrices to be strictly positive. Vertices are
enumerated by solving every square subsystem of tight constraints in one
batched linear solve; labels are read off from *all* tight constraints so
degenerate games still pair up correctly. Only vertices are reported, which
is enough for SWNE/SCNE selection since welfare is bilinear.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

LABEL_TOL = 1e-9
DEDUP_TOL = 1e-6


@dataclass(frozen=True)
class Equilibrium:
    x: np.ndarray
    y: np.ndarray
    u: float
    v: float

    @property
    def welfare(self) -> float:
        return self.u + self.v


@dataclass
class EquilibriumSet:
    equilibria: list[Equilibrium]
    degenerate: bool = False

    def __len__(self) -> int:
        return len(self.equilibria)

    def __iter__(self):
        return iter(self.equilibria)

    def values(self) -> list[tuple[float, float]]:
        return [(e.u, e.v) for e in self.equilibria]


@dataclass(frozen=True)
class OptimalEquilibrium:
    u: float
    v: float
    x: np.ndarray
    y: np.ndarray
    kind: str = "SWNE"

    @property
    def values(self) -> tuple[float, float]:
        return self.u, self.v


@lru_cache(maxsize=256)
def _subsets(n: int, k: int) -> np.ndarray:
    return np.array(list(combinations(range(n), k)), dtype=np.intp).reshape(-1, k)


def _normalise(M: np.ndarray) -> np.ndarray:
    """Positive affine image of ``M`` with entries in [1, 2]."""
    lo = M.min()
    span = M.max() - lo
    return 1.0 + (M - lo) / (span if span > 0 else 1.0)


def _vertices(M: np.ndarray):
    """Non-zero vertices of ``{z >= 0 : M z <= 1}`` with tight-constraint masks.

    Returns ``(points, zero_mask, tight_mask)`` where ``zero_mask[v, i]`` marks
    ``z_i = 0`` and ``tight_mask[v, j]`` marks ``(M z)_j = 1``.
    """
    p, n = M.shape
    K = np.vstack([np.eye(n), M])
    rhs = np.concatenate([np.zeros(n), np.ones(p)])
    idx = _subsets(n + p, n)
    systems = K[idx]
    det = np.linalg.det(systems)
    ok = np.abs(det) > 1e-12
    systems, idx = systems[ok], idx[ok]
    if len(idx) == 0:
        return np.zeros((0, n)), np.zeros((0, n), bool), np.zeros((0, p), bool)
    pts = np.linalg.solve(systems, rhs[idx][..., None])[..., 0]
    Mz = pts @ M.T
    feasible = (pts >= -LABEL_TOL).all(axis=1) & (Mz <= 1 + LABEL_TOL).all(axis=1)
    pts = pts[feasible]
    pts = pts[pts.sum(axis=1) > LABEL_TOL]
    if len(pts) == 0:
        return np.zeros((0, n)), np.zeros((0, n), bool), np.zeros((0, p), bool)
    pts = np.clip(pts, 0.0, None)
    _, keep = np.unique(np.round(pts, 9), axis=0, return_index=True)
    pts = pts[np.sort(keep)]
    zero = pts <= LABEL_TOL
    tight = np.abs(pts @ M.T - 1.0) <= LABEL_TOL
    return pts, zero, tight


def _as_game(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape != B.shape or A.size == 0:
        raise ValueError(f"bimatrix game needs two equal non-empty 2-d arrays, got {A.shape} and {B.shape}")
    if not (np.isfinite(A).all() and np.isfinite(B).all()):
        raise ValueError("bimatrix game has non-finite utilities")
    return A, B


def _sort_key(e: Equilibrium):
    r = lambda a: tuple(np.round(a, 9))
    return (-round(e.welfare, 9), -round(e.u, 9), -round(e.v, 9),
            tuple(-(e.x > 1e-9).astype(int)), tuple(-(e.y > 1e-9).astype(int)), r(-e.x), r(-e.y))


def enumerate_ne(A, B) -> EquilibriumSet:
    """All extreme Nash equilibria of the bimatrix game ``(A, B)``.

    ``A`` holds the row player's utilities and ``B`` the column player's.
    Equilibria come back sorted by welfare, then ``u``, then ``v``.
    """
    A, B = _as_game(A, B)
    l, m = A.shape
    An, Bn = _normalise(A), _normalise(B)

    xs, x_zero, x_tight = _vertices(Bn.T)      # labels: rows where x_i = 0, cols where best response
    ys, y_zero, y_tight = _vertices(An)        # labels: rows where best response, cols where y_j = 0
    if len(xs) == 0 or len(ys) == 0:
        return EquilibriumSet([])
    # label bitmasks over rows (0..l-1) then columns (l..l+m-1)
    row_bits = 1 << np.arange(l, dtype=np.int64)
    col_bits = 1 << np.arange(l, l + m, dtype=np.int64)
    lx = x_zero @ row_bits + x_tight @ col_bits
    ly = y_tight @ row_bits + y_zero @ col_bits
    full = (1 << (l + m)) - 1
    pairs = np.argwhere((lx[:, None] | ly[None, :]) == full)
    degenerate = bool((x_zero.sum(1) + x_tight.sum(1) > l).any()
                      or (y_tight.sum(1) + y_zero.sum(1) > m).any())

    found: list[Equilibrium] = []
    for i, j in pairs:
        x = xs[i] / xs[i].sum()
        y = ys[j] / ys[j].sum()
        u = float(x @ A @ y)
        v = float(x @ B @ y)
        e = Equilibrium(x, y, u, v)
        if not any(_close(e, f) for f in found):
            found.append(e)
    found.sort(key=_sort_key)
    return EquilibriumSet(found, degenerate)


def _close(e: Equilibrium, f: Equilibrium) -> bool:
    return (abs(e.u - f.u) <= DEDUP_TOL and abs(e.v - f.v) <= DEDUP_TOL
            and np.abs(e.x - f.x).max() <= DEDUP_TOL and np.abs(e.y - f.y).max() <= DEDUP_TOL)


def filter_dominated(A, B):
    """Iteratively remove rows and columns strictly dominated by a pure strategy.

    Returns ``(A', B', rows, cols)`` where ``rows``/``cols`` map the reduced
    game's indices back to the original ones.
    """
    A, B = _as_game(A, B)
    rows = np.arange(A.shape[0])
    cols = np.arange(A.shape[1])
    changed = True
    while changed:
        changed = False
        sub = A[np.ix_(rows, cols)]
        for r in range(len(rows)):
            if len(rows) > 1 and (sub > sub[r]).all(axis=1).any():
                rows = np.delete(rows, r)
                changed = True
                break
        if changed:
            continue
        sub = B[np.ix_(rows, cols)]
        for c in range(len(cols)):
            if len(cols) > 1 and (sub.T > sub[:, c]).all(axis=1).any():
                cols = np.delete(cols, c)
                changed = True
                break
    return A[np.ix_(rows, cols)], B[np.ix_(rows, cols)], rows, cols


def _pure_shortcut(A: np.ndarray, B: np.ndarray):
    """The SWNE when the unique welfare-maximal cell is itself a pure NE.

    Any mixed NE with the same welfare would have to be supported on
    welfare-maximal cells only, so uniqueness of that cell settles the
    choice without enumeration.
    """
    W = A + B
    top = W.max()
    cells = np.argwhere(W >= top - 1e-12 * max(1.0, abs(top)))
    if len(cells) != 1:
        return None
    i, j = cells[0]
    if A[i, j] >= A[:, j].max() and B[i, j] >= B[i, :].max():
        return int(i), int(j)
    return None


def swne(A, B, prune: bool = True) -> OptimalEquilibrium:
    """Social-welfare-optimal NE; ties go to larger ``u``, then larger ``v``."""
    A, B = _as_game(A, B)
    l, m = A.shape
    cell = _pure_shortcut(A, B)
    if cell is not None:
        x = np.zeros(l)
        y = np.zeros(m)
        x[cell[0]] = 1.0
        y[cell[1]] = 1.0
        return OptimalEquilibrium(float(A[cell]), float(B[cell]), x, y)
    if prune:
        Ar, Br, rows, cols = filter_dominated(A, B)
    else:
        Ar, Br, rows, cols = A, B, np.arange(l), np.arange(m)
    eqs = enumerate_ne(Ar, Br)
    if not eqs.equilibria:
        raise ArithmeticError(f"no equilibrium found for bimatrix game\nA={A}\nB={B}")
    best = eqs.equilibria[0]
    x = np.zeros(l)
    y = np.zeros(m)
    x[rows] = best.x
    y[cols] = best.y
    return OptimalEquilibrium(best.u, best.v, x, y)


def scne(A, B, prune: bool = True) -> OptimalEquilibrium:
    """Social-cost-optimal NE, computed as the SWNE of the negated game."""
    A, B = _as_game(A, B)
    best = swne(-A, -B, prune)
    return OptimalEquilibrium(-best.u, -best.v, best.x, best.y, "SCNE")
