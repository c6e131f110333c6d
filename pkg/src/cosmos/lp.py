"""Dense two-phase simplex with Bland's anti-cycling rule.

Instances are small (a few dozen variables), so a full tableau in numpy is
both simple and fast enough.  The solver is deterministic: pivot choice
depends only on the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from cosmos.errors import UsageError

Status = Literal["optimal", "infeasible", "unbounded"]

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11
MAX_PIVOTS = 50_000


@dataclass
class LpInstance:
    """``min c @ x  s.t.  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  lo <= x <= hi``.

    ``bounds`` holds one ``(lo, hi)`` pair per variable; either side may be
    infinite.  Names are optional and only used for diagnostics.
    """

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    bounds: list[tuple[float, float]] | None = None
    var_names: list[str] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.c)


@dataclass
class LpResult:
    status: Status
    x: np.ndarray | None = None
    objective: float | None = None
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _as_2d(A, n: int) -> np.ndarray:
    if A is None:
        return np.zeros((0, n))
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] != n:
        raise UsageError(f"constraint matrix must have {n} columns, got shape {A.shape}")
    return A


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    colv = T[:, col].copy()
    colv[row] = 0.0
    nz = np.nonzero(np.abs(colv) > 0.0)[0]
    if nz.size:
        T[nz] -= np.outer(colv[nz], T[row])


def _run(T: np.ndarray, basis: list[int], n_cols: int, allowed: np.ndarray, tol: float = FEAS_TOL) -> tuple[str, int]:
    """Simplex iterations on tableau ``T`` whose last row is the reduced cost.

    Columns ``>= n_cols`` hold the right-hand side; only columns flagged in
    ``allowed`` may enter.  Bland's rule: lowest-index improving column, ties
    in the ratio test broken by lowest basic variable index.
    """
    m = T.shape[0] - 1
    pivots = 0
    while True:
        cost = T[-1, :n_cols]
        candidates = np.nonzero((cost < -tol) & allowed)[0]
        if candidates.size == 0:
            return "optimal", pivots
        col = int(candidates[0])
        column = T[:m, col]
        pos = np.nonzero(column > PIVOT_TOL)[0]
        if pos.size == 0:
            return "unbounded", pivots
        ratios = T[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
        if pivots > MAX_PIVOTS:
            raise RuntimeError("simplex pivot limit exceeded")


def _standard_form(inst: LpInstance):
    """Rewrite as ``min c' y  s.t.  E y = f,  y >= 0`` plus a back-map to x."""
    n = inst.n_vars
    c = np.asarray(inst.c, dtype=float)
    A_ub = _as_2d(inst.A_ub, n)
    A_eq = _as_2d(inst.A_eq, n)
    b_ub = np.zeros(0) if inst.b_ub is None else np.asarray(inst.b_ub, dtype=float).reshape(-1)
    b_eq = np.zeros(0) if inst.b_eq is None else np.asarray(inst.b_eq, dtype=float).reshape(-1)
    if b_ub.shape[0] != A_ub.shape[0] or b_eq.shape[0] != A_eq.shape[0]:
        raise UsageError("right-hand side length does not match constraint rows")
    bounds = inst.bounds if inst.bounds is not None else [(0.0, np.inf)] * n
    if len(bounds) != n:
        raise UsageError(f"expected {n} bounds, got {len(bounds)}")

    # x_j = shift_j + sum_k M[j, k] y_k
    shift = np.zeros(n)
    cols: list[tuple[int, float]] = []  # (x index, sign) for every y column
    upper_rows: list[tuple[int, float]] = []  # (y column, ub on y)
    for j, (lo, hi) in enumerate(bounds):
        lo = -np.inf if lo is None else float(lo)
        hi = np.inf if hi is None else float(hi)
        if lo > hi + FEAS_TOL:
            return None
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                upper_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    M = np.zeros((n, len(cols)))
    for k, (j, s) in enumerate(cols):
        M[j, k] = s

    ny = len(cols)
    n_ub = A_ub.shape[0] + len(upper_rows)
    rows_ub = np.zeros((n_ub, ny))
    rhs_ub = np.zeros(n_ub)
    rows_ub[: A_ub.shape[0]] = A_ub @ M
    rhs_ub[: A_ub.shape[0]] = b_ub - A_ub @ shift
    for r, (k, ub) in enumerate(upper_rows, start=A_ub.shape[0]):
        rows_ub[r, k] = 1.0
        rhs_ub[r] = ub
    rows_eq = A_eq @ M
    rhs_eq = b_eq - A_eq @ shift

    # slacks for the inequality rows
    E = np.zeros((n_ub + rows_eq.shape[0], ny + n_ub))
    E[:n_ub, :ny] = rows_ub
    E[:n_ub, ny:] = np.eye(n_ub)
    E[n_ub:, :ny] = rows_eq
    f = np.concatenate([rhs_ub, rhs_eq])
    cy = np.concatenate([M.T @ c, np.zeros(n_ub)])
    return E, f, cy, M, shift


def solve_lp(inst: LpInstance, tol: float = FEAS_TOL) -> LpResult:
    """Solve ``inst`` exactly up to floating-point pivoting.

    ``tol`` is the optimality and feasibility tolerance; feasibility oracles
    that bisect on the answer want it tighter than the default.
    """
    sf = _standard_form(inst)
    if sf is None:
        return LpResult("infeasible")
    E, f, cy, M, shift = sf
    m, ny = E.shape
    neg = f < 0
    E[neg] *= -1
    f[neg] *= -1

    # Phase 1: one artificial per row.
    n_cols = ny + m
    T = np.zeros((m + 1, n_cols + 1))
    T[:m, :ny] = E
    T[:m, ny:n_cols] = np.eye(m)
    T[:m, -1] = f
    T[-1, :ny] = -E.sum(axis=0)
    T[-1, -1] = -f.sum()
    basis = list(range(ny, n_cols))
    allowed = np.ones(n_cols, dtype=bool)
    _, piv1 = _run(T, basis, n_cols, allowed, tol)
    scale = max(1.0, float(np.abs(f).max()) if m else 1.0)
    if -T[-1, -1] > tol * scale:
        return LpResult("infeasible", pivots=piv1)

    # Drive remaining artificials out of the basis or drop redundant rows.
    keep = []
    for r in range(m):
        if basis[r] >= ny:
            row = T[r, :ny]
            nz = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
            if nz.size:
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
                keep.append(r)
        else:
            keep.append(r)
    T2 = np.zeros((len(keep) + 1, ny + 1))
    T2[:-1, :ny] = T[keep, :ny]
    T2[:-1, -1] = T[keep, -1]
    basis2 = [basis[r] for r in keep]
    T2[-1, :ny] = cy
    for r, b in enumerate(basis2):
        if T2[-1, b] != 0.0:
            T2[-1] -= T2[-1, b] * T2[r]
    status, piv2 = _run(T2, basis2, ny, np.ones(ny, dtype=bool), tol)
    if status == "unbounded":
        return LpResult("unbounded", pivots=piv1 + piv2)
    y = np.zeros(ny)
    for r, b in enumerate(basis2):
        y[b] = T2[r, -1]
    y = np.maximum(y, 0.0)
    x = shift + M @ y[: M.shape[1]]
    obj = float(np.asarray(inst.c, dtype=float) @ x)
    return LpResult("optimal", x=x, objective=obj, pivots=piv1 + piv2)


def linprog(
    c: Sequence[float],
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    bounds: Sequence[tuple[float, float]] | None = None,
) -> LpResult:
    """Convenience wrapper with a ``scipy.optimize.linprog``-like signature."""
    return solve_lp(
        LpInstance(
            c=np.asarray(c, dtype=float),
            A_ub=None if A_ub is None else np.asarray(A_ub, dtype=float),
            b_ub=None if b_ub is None else np.asarray(b_ub, dtype=float),
            A_eq=None if A_eq is None else np.asarray(A_eq, dtype=float),
            b_eq=None if b_eq is None else np.asarray(b_eq, dtype=float),
            bounds=None if bounds is None else list(bounds),
        )
    )
