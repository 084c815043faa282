"""Zero-sum matrix games solved by a small dense simplex.

The LP kernel is a two-phase tableau simplex. Entering variables are picked
by the largest reduced cost until a degenerate pivot is seen, after which
Bland's smallest-index rule takes over for the rest of the solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

PIVOT_TOL = 1e-9
VERIFY_TOL = 1e-7


class LPError(Exception):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


class MatrixGameError(Exception):
    pass


@dataclass
class LPResult:
    value: float
    x: np.ndarray
    duals: np.ndarray


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])


def _run_simplex(T: np.ndarray, basis: list[int], allowed: np.ndarray, bland: bool = False,
                 max_pivots: int = 50000) -> None:
    """Maximise the objective held in row 0 of ``T`` (stored as negated costs).

    Row 0 holds ``-c`` so a negative entry means the column improves the
    objective. The last column is the right-hand side.
    """
    for _ in range(max_pivots):
        obj = T[0, :-1]
        candidates = np.flatnonzero((obj < -PIVOT_TOL) & allowed)
        if candidates.size == 0:
            return
        col = int(candidates[0]) if bland else int(candidates[np.argmin(obj[candidates])])
        column = T[1:, col]
        pos = column > PIVOT_TOL
        if not pos.any():
            raise Unbounded("objective is unbounded")
        ratios = np.full(column.shape, np.inf)
        ratios[pos] = T[1:, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + PIVOT_TOL)
        # Bland's leaving rule: smallest basic variable index among ties
        leave = int(min(ties, key=lambda r: basis[r]))
        if best <= PIVOT_TOL:
            bland = True
        _pivot(T, leave + 1, col)
        basis[leave] = col
    raise LPError("pivot limit reached")


def lp_maximize(c: Sequence[float], A: Sequence[Sequence[float]] | None = None,
                senses: Sequence[str] | None = None, b: Sequence[float] | None = None,
                free: Sequence[int] = (), bland: bool = False) -> LPResult:
    """Maximise ``c @ x`` subject to ``A[i] @ x (senses[i]) b[i]``.

    ``senses`` holds ``"<="``, ``">="`` or ``"="``. Variables are
    non-negative except those listed in ``free``. Returns the optimum, a
    witness ``x`` and the dual values of the constraints.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A = np.zeros((0, n)) if A is None else np.asarray(A, dtype=float).reshape(-1, n)
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float)
    senses = list(senses) if senses is not None else ["<="] * len(b)
    m = A.shape[0]
    if len(senses) != m or b.size != m:
        raise ValueError("constraint arrays have mismatched lengths")

    # split free variables into positive and negative parts
    free = sorted(set(free))
    cols = [A] + [-A[:, [j]] for j in free]
    A2 = np.hstack(cols) if free else A.copy()
    c2 = np.concatenate([c, -c[free]]) if free else c.copy()
    nv = A2.shape[1]

    sign = np.where(b < 0, -1.0, 1.0)
    A2 = A2 * sign[:, None]
    b2 = b * sign
    flipped = []
    for s, sg in zip(senses, sign):
        if s not in ("<=", ">=", "="):
            raise ValueError(f"unknown constraint sense {s!r}")
        if sg < 0 and s != "=":
            s = "<=" if s == ">=" else ">="
        flipped.append(s)

    n_slack = sum(s != "=" for s in flipped)
    n_art = sum(s != "<=" for s in flipped)
    width = nv + n_slack + n_art + 1
    T = np.zeros((m + 1, width))
    T[1:, :nv] = A2
    T[1:, -1] = b2
    basis = [0] * m
    slack_col = {}
    art_cols = []
    k_s, k_a = nv, nv + n_slack
    for i, s in enumerate(flipped):
        if s == "<=":
            T[i + 1, k_s] = 1.0
            slack_col[i] = k_s
            basis[i] = k_s
            k_s += 1
        elif s == ">=":
            T[i + 1, k_s] = -1.0
            slack_col[i] = k_s
            k_s += 1
            T[i + 1, k_a] = 1.0
            basis[i] = k_a
            art_cols.append(k_a)
            k_a += 1
        else:
            T[i + 1, k_a] = 1.0
            basis[i] = k_a
            art_cols.append(k_a)
            k_a += 1

    allowed = np.ones(width - 1, dtype=bool)
    if art_cols:
        # phase 1: maximise minus the sum of artificials
        T[0, :] = 0.0
        T[0, art_cols] = 1.0
        for i, bv in enumerate(basis):
            if bv in art_cols:
                T[0] -= T[i + 1]
        _run_simplex(T, basis, allowed, bland)
        if T[0, -1] < -1e-7 * max(1.0, np.abs(b2).max(initial=0.0)):
            raise Infeasible("constraints are infeasible")
        art_set = set(art_cols)
        for i, bv in enumerate(basis):
            if bv in art_set:
                row = T[i + 1, :nv + n_slack]
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size:
                    _pivot(T, i + 1, int(nz[0]))
                    basis[i] = int(nz[0])
        allowed[art_cols] = False

    T[0, :] = 0.0
    T[0, :nv] = -c2
    for i, bv in enumerate(basis):
        if T[0, bv] != 0.0:
            T[0] -= T[0, bv] * T[i + 1]
    _run_simplex(T, basis, allowed, bland)

    x2 = np.zeros(width - 1)
    for i, bv in enumerate(basis):
        x2[bv] = T[i + 1, -1]
    x = x2[:n].copy()
    for k, j in enumerate(free):
        x[j] -= x2[n + k]

    # duals from the reduced costs of slack/artificial columns
    duals = np.zeros(m)
    art_iter = iter(art_cols)
    for i, s in enumerate(flipped):
        if s == "<=":
            duals[i] = T[0, slack_col[i]]
        elif s == ">=":
            duals[i] = -T[0, slack_col[i]]
            next(art_iter)
        else:
            col = next(art_iter)
            # artificial columns keep their reduced cost: y_i = T0[col]
            duals[i] = T[0, col]
    duals *= sign
    return LPResult(float(c @ x), x, duals)


@dataclass
class MatrixSolution:
    value: float
    x: np.ndarray
    y: np.ndarray


def _check_guarantees(Z: np.ndarray, sol: MatrixSolution, tol: float) -> bool:
    lo = (sol.x @ Z).min()
    hi = (Z @ sol.y).max()
    return lo >= sol.value - tol and hi <= sol.value + tol


def saddle_point(Z: np.ndarray) -> tuple[int, int] | None:
    """Return a pure saddle point ``(i, j)`` if one exists."""
    row_min = Z.min(axis=1)
    col_max = Z.max(axis=0)
    lo, hi = row_min.max(), col_max.min()
    if hi - lo <= 1e-12 * max(1.0, abs(lo)):
        return int(np.argmax(row_min)), int(np.argmin(col_max))
    return None


def solve_matrix_game(Z, minimize: bool = False) -> MatrixSolution:
    """Value and optimal mixed strategies of the zero-sum game ``Z``.

    The row player maximises unless ``minimize`` is set, in which case the
    row player minimises and ``value`` is the min-max value.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.size == 0:
        raise MatrixGameError(f"matrix game must be a non-empty 2-d array, got shape {Z.shape}")
    if not np.isfinite(Z).all():
        raise MatrixGameError(f"matrix game has non-finite entries:\n{Z}")
    if minimize:
        sol = solve_matrix_game(-Z)
        return MatrixSolution(-sol.value, sol.x, sol.y)

    l, m = Z.shape
    sp = saddle_point(Z)
    if sp is not None:
        x = np.zeros(l)
        y = np.zeros(m)
        x[sp[0]] = 1.0
        y[sp[1]] = 1.0
        return MatrixSolution(float(Z[sp]), x, y)

    shift = 1.0 - Z.min()
    Zp = Z + shift
    for bland in (False, True):
        # column player: maximise sum(q) s.t. Zp q <= 1; the duals give the row mix
        res = lp_maximize(np.ones(m), Zp, ["<="] * l, np.ones(l), bland=bland)
        total = res.value
        if total <= 0:
            continue
        y = np.clip(res.x, 0.0, None)
        x = np.clip(res.duals, 0.0, None)
        if y.sum() <= 0 or x.sum() <= 0:
            continue
        y /= y.sum()
        x /= x.sum()
        sol = MatrixSolution(1.0 / total - shift, x, y)
        if _check_guarantees(Z, sol, VERIFY_TOL * max(1.0, np.abs(Z).max())):
            return sol
    raise MatrixGameError(f"LP failed to certify an optimal strategy for matrix:\n{Z}")


KERNEL_PAIRS_LIMIT = 400


def _kernel_values(Zs: np.ndarray) -> np.ndarray:
    """Values via square kernels, NaN where no kernel certified.

    Every matrix game has an optimal pair of extreme strategies supported
    on a nonsingular square submatrix (Shapley-Snow). For each candidate
    pair of supports we solve the two indifference systems for the whole
    batch at once and accept the first pair that passes the optimality
    check.
    """
    nb, l, m = Zs.shape
    out = np.full(nb, np.nan)
    scale = np.maximum(1.0, np.abs(Zs).reshape(nb, -1).max(axis=1))
    open_ = np.ones(nb, dtype=bool)
    for k in range(2, min(l, m) + 1):
        for I in combinations(range(l), k):
            for J in combinations(range(m), k):
                idx = np.flatnonzero(open_)
                if idx.size == 0:
                    return out
                M = Zs[idx][:, I][:, :, J]
                A = np.zeros((idx.size, k + 1, k + 1))
                A[:, k, :k] = 1.0
                A[:, :k, k] = -1.0
                rhs = np.zeros((idx.size, k + 1))
                rhs[:, k] = 1.0
                Ax = A.copy()
                Ax[:, :k, :k] = M.transpose(0, 2, 1)
                Ay = A
                Ay[:, :k, :k] = M
                ok = (np.abs(np.linalg.det(Ax)) > 1e-12) & (np.abs(np.linalg.det(Ay)) > 1e-12)
                if not ok.any():
                    continue
                idx, Ax, Ay, rhs = idx[ok], Ax[ok], Ay[ok], rhs[ok]
                sx = np.linalg.solve(Ax, rhs[..., None])[..., 0]
                sy = np.linalg.solve(Ay, rhs[..., None])[..., 0]
                v = sx[:, k]
                tol = 1e-9 * scale[idx]
                x = np.zeros((idx.size, l))
                y = np.zeros((idx.size, m))
                x[:, I] = sx[:, :k]
                y[:, J] = sy[:, :k]
                Z = Zs[idx]
                good = ((x >= -tol[:, None]).all(1) & (y >= -tol[:, None]).all(1)
                        & (np.einsum("bi,bij->bj", x, Z).min(1) >= v - tol)
                        & (np.einsum("bij,bj->bi", Z, y).max(1) <= v + tol))
                out[idx[good]] = v[good]
                open_[idx[good]] = False
    return out


def _kernel_pairs(l: int, m: int) -> int:
    from math import comb
    return sum(comb(l, k) * comb(m, k) for k in range(2, min(l, m) + 1))


def matrix_game_values(Zs: np.ndarray, minimize: bool = False) -> np.ndarray:
    """Values of a stack of equally shaped matrix games ``Zs[b]``.

    Saddle points and 2x2 games are closed-form; small games go through the
    batched kernel search and anything left over through the simplex.
    """
    Zs = np.asarray(Zs, dtype=float)
    if minimize:
        return -matrix_game_values(-Zs)
    nb, l, m = Zs.shape
    lo = Zs.min(axis=2).max(axis=1)
    hi = Zs.max(axis=1).min(axis=1)
    out = lo.copy()
    open_ = hi - lo > 1e-12 * np.maximum(1.0, np.abs(lo))
    if not open_.any():
        return out
    idx = np.flatnonzero(open_)
    if l == 2 and m == 2:
        # no saddle point: both players mix fully, closed form applies
        a, b_ = Zs[idx, 0, 0], Zs[idx, 0, 1]
        c, d = Zs[idx, 1, 0], Zs[idx, 1, 1]
        out[idx] = (a * d - b_ * c) / (a + d - b_ - c)
        return out
    if _kernel_pairs(l, m) <= KERNEL_PAIRS_LIMIT:
        kv = _kernel_values(Zs[idx])
        hit = ~np.isnan(kv)
        out[idx[hit]] = kv[hit]
        idx = idx[~hit]
    for i in idx:
        out[i] = solve_matrix_game(Zs[i]).value
    return out
