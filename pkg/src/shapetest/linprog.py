"""Dense linear programming by the two-phase simplex method.

Problem sizes in this package are small (a few hundred rows and columns), so a
dense tableau with vectorized pivots is fast enough and keeps the solver fully
self-contained. Dantzig pricing is used by default; the solver switches to
Bland's rule after a run of degenerate pivots, which guarantees termination.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

LE, EQ, GE = -1, 0, 1

_SENSE_CODES = {"<=": LE, "=": EQ, ">=": GE, LE: LE, EQ: EQ, GE: GE}

# Tolerances: feasibility is checked relative to 1 + |b|_inf, reduced costs
# against an absolute threshold. Acceptance comparisons downstream are at 1e-6,
# so these leave two orders of magnitude of slack.
FEAS_TOL = 1e-8
COST_TOL = 1e-9
PIVOT_TOL = 1e-10

# Consecutive degenerate pivots tolerated under Dantzig pricing before
# switching to Bland's rule.
_STALL_LIMIT = 60


class NumericalFailure(RuntimeError):
    """Raised when simplex pivoting stalls or a certified solution cannot be produced."""


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """min c'x  subject to  A x {<=,=,>=} b  and  lower <= x <= upper."""

    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    senses: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def build(cls, c, a=None, b=None, senses=None, lower=0.0, upper=np.inf):
        c = np.atleast_1d(np.asarray(c, dtype=np.float64))
        n = c.size
        if a is None:
            a = np.zeros((0, n))
            b = np.zeros(0)
            senses = []
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = np.atleast_1d(np.asarray(b, dtype=np.float64))
        if a.shape != (b.size, n):
            raise ValueError(f"constraint shapes inconsistent: A{a.shape}, b({b.size},), c({n},)")
        if senses is None:
            senses = [LE] * b.size
        if isinstance(senses, (str, int)):
            senses = [senses] * b.size
        sense_arr = np.array([_SENSE_CODES[s] for s in senses], dtype=np.int8)
        if sense_arr.size != b.size:
            raise ValueError("one sense per constraint row required")
        lo = np.broadcast_to(np.asarray(lower, dtype=np.float64), (n,)).copy()
        up = np.broadcast_to(np.asarray(upper, dtype=np.float64), (n,)).copy()
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("A, b and c must be finite")
        if np.any(lo > up):
            raise ValueError("lower bound exceeds upper bound")
        return cls(c=c, a=a, b=b, senses=sense_arr, lower=lo, upper=up)

    @property
    def nrows(self) -> int:
        return self.b.size

    @property
    def ncols(self) -> int:
        return self.c.size


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray = field(default=None, repr=False)
    objective_value: float = np.nan


def solve(lp: LinearProgram) -> LpSolution:
    """Solve the program; status is certified by an explicit feasibility check."""
    work = _Standardized(lp)
    tableau, basis, art_cols = work.tableau()
    ncols = tableau.shape[1] - 1
    max_iters = 50 * (tableau.shape[0] - 1 + ncols)
    iters = 0

    if art_cols.size:
        _set_phase1_costs(tableau, basis, art_cols)
        iters = _run_simplex(tableau, basis, ncols, art_cols, max_iters, iters, phase=1)
        if tableau[-1, -1] < -FEAS_TOL * (1.0 + work.bscale):
            return LpSolution(status=LpStatus.INFEASIBLE)
        tableau, basis = _drop_artificials(tableau, basis, art_cols)
        ncols = tableau.shape[1] - 1

    _set_phase2_costs(tableau, basis, work.cost)
    try:
        _run_simplex(tableau, basis, ncols, np.empty(0, dtype=np.intp), max_iters, iters, phase=2)
    except _Unbounded:
        return LpSolution(status=LpStatus.UNBOUNDED)

    x = work.recover(tableau, basis)
    _certify(lp, x)
    return LpSolution(status=LpStatus.OPTIMAL, x=x, objective_value=float(lp.c @ x))


class _Unbounded(Exception):
    pass


class _Standardized:
    """Rewrite a general program as min cost'y, M y (<=|=) rhs, y >= 0.

    Finite lower bounds are shifted out, variables with only a finite upper
    bound are negated, and doubly-unbounded variables are split into a
    positive and a negative part. Two-sided bounds add one extra <= row.
    """

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        cols = []        # columns of the standardized constraint matrix
        cost = []
        self.col_map = []  # (original index, sign) per standardized column
        shift = np.zeros(lp.ncols)
        extra_rows = []  # (standardized column, rhs) for two-sided bounds

        for i in range(lp.ncols):
            lo, up = lp.lower[i], lp.upper[i]
            if np.isfinite(lo):
                shift[i] = lo
                self.col_map.append((i, 1.0))
                cols.append(lp.a[:, i])
                cost.append(lp.c[i])
                if np.isfinite(up):
                    extra_rows.append((len(cols) - 1, up - lo))
            elif np.isfinite(up):
                shift[i] = up
                self.col_map.append((i, -1.0))
                cols.append(-lp.a[:, i])
                cost.append(-lp.c[i])
            else:
                self.col_map.append((i, 1.0))
                cols.append(lp.a[:, i])
                cost.append(lp.c[i])
                self.col_map.append((i, -1.0))
                cols.append(-lp.a[:, i])
                cost.append(-lp.c[i])

        self.shift = shift
        nstd = len(cols)
        m = lp.nrows + len(extra_rows)
        mat = np.zeros((m, nstd))
        mat[: lp.nrows, :] = np.column_stack(cols)
        rhs = np.concatenate([lp.b - lp.a @ shift, [r for _, r in extra_rows]])
        senses = np.concatenate([lp.senses, np.full(len(extra_rows), LE, dtype=np.int8)])
        for k, (j, _) in enumerate(extra_rows):
            mat[lp.nrows + k, j] = 1.0

        # Normalize so every rhs is >= 0; >= rows with nonpositive rhs become
        # plain <= rows, which avoids an artificial variable for them.
        flip = (rhs < 0) | ((rhs <= 0) & (senses == GE))
        mat[flip] *= -1.0
        rhs[flip] *= -1.0
        senses[flip] = np.where(senses[flip] == EQ, EQ, -senses[flip])

        self.mat, self.rhs, self.row_senses = mat, rhs, senses
        self.cost_struct = np.asarray(cost)
        self.nstd = nstd
        self.bscale = float(np.max(np.abs(lp.b))) if lp.b.size else 0.0

    def tableau(self):
        mat, rhs, senses = self.mat, self.rhs, self.row_senses
        m = rhs.size
        le_rows = np.flatnonzero(senses == LE)
        ge_rows = np.flatnonzero(senses == GE)
        art_rows = np.flatnonzero(senses != LE)  # >= and = rows need artificials
        nslack = le_rows.size + ge_rows.size
        nart = art_rows.size
        total = self.nstd + nslack + nart

        tab = np.zeros((m + 1, total + 1))
        tab[:m, : self.nstd] = mat
        tab[:m, -1] = rhs
        basis = np.empty(m, dtype=np.intp)

        col = self.nstd
        for r in le_rows:
            tab[r, col] = 1.0
            basis[r] = col
            col += 1
        for r in ge_rows:
            tab[r, col] = -1.0
            col += 1
        art_cols = np.arange(col, col + nart, dtype=np.intp)
        for r, j in zip(art_rows, art_cols):
            tab[r, j] = 1.0
            basis[r] = j
        # full cost vector for phase 2: structural costs then zeros
        self.cost = np.zeros(total)
        self.cost[: self.nstd] = self.cost_struct
        return tab, basis, art_cols

    def recover(self, tableau, basis) -> np.ndarray:
        ncols = tableau.shape[1] - 1
        y = np.zeros(ncols)
        rows = basis < ncols  # rows whose basic column survived artificial removal
        y[basis[rows]] = tableau[: tableau.shape[0] - 1, -1][rows]
        x = self.shift.copy()
        for j, (i, sign) in enumerate(self.col_map):
            x[i] += sign * y[j]
        return x


def _set_phase1_costs(tableau, basis, art_cols):
    m = tableau.shape[0] - 1
    tableau[-1, :] = 0.0
    tableau[-1, art_cols] = 1.0
    art_basic = np.isin(basis, art_cols)
    tableau[-1, :] -= tableau[:m][art_basic].sum(axis=0)


def _set_phase2_costs(tableau, basis, cost):
    m = tableau.shape[0] - 1
    tableau[-1, :-1] = cost[: tableau.shape[1] - 1]
    tableau[-1, -1] = 0.0
    cb = tableau[-1, basis].copy()
    nz = np.abs(cb) > 0
    if np.any(nz):
        tableau[-1, :] -= cb[nz] @ tableau[:m][nz]


def _drop_artificials(tableau, basis, art_cols):
    """Pivot artificial variables out of the basis, dropping dependent rows."""
    m = tableau.shape[0] - 1
    keep_rows = np.ones(m, dtype=bool)
    first_art = art_cols[0]
    for r in range(m):
        if basis[r] < first_art:
            continue
        row = tableau[r, :first_art]
        candidates = np.flatnonzero(np.abs(row) > PIVOT_TOL)
        if candidates.size:
            _pivot(tableau, r, int(candidates[0]))
            basis[r] = int(candidates[0])
        else:
            keep_rows[r] = False  # redundant constraint
    keep = np.append(keep_rows, True)
    tableau = np.ascontiguousarray(
        np.delete(tableau[keep], np.s_[first_art : art_cols[-1] + 1], axis=1)
    )
    basis = basis[keep_rows]
    return tableau, basis


def _pivot(tableau, row, col):
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0


def _run_simplex(tableau, basis, ncols, art_cols, max_iters, iters, phase):
    m = tableau.shape[0] - 1
    rhs = tableau[:m, -1]
    costrow = tableau[-1, :ncols]
    bland = False
    stall = 0
    # preallocated pivot workspaces; the update is the hot loop
    buf = np.empty_like(tableau)
    fcol = np.empty(m + 1)

    while True:
        if iters >= max_iters:
            raise NumericalFailure(
                f"simplex exceeded {max_iters} pivots (phase {phase})"
            )
        if bland:
            negatives = np.flatnonzero(costrow < -COST_TOL)
            if negatives.size == 0:
                return iters
            j = int(negatives[0])
        else:
            j = int(np.argmin(costrow))
            if costrow[j] >= -COST_TOL:
                return iters

        col = tableau[:m, j]
        eligible = np.flatnonzero(col > PIVOT_TOL)
        if eligible.size == 0:
            if phase == 1:
                raise NumericalFailure("phase-1 objective unbounded: numerical breakdown")
            raise _Unbounded
        ratios = rhs[eligible] / col[eligible]
        best = ratios.min()
        ties = eligible[ratios <= best + PIVOT_TOL]
        r = int(ties[np.argmin(basis[ties])]) if ties.size > 1 else int(eligible[int(np.argmin(ratios))])

        degenerate = best <= PIVOT_TOL
        stall = stall + 1 if degenerate else 0
        if stall > _STALL_LIMIT:
            bland = True

        prow = tableau[r]
        prow /= prow[j]
        np.copyto(fcol, tableau[:, j])
        fcol[r] = 0.0
        np.multiply.outer(fcol, prow, out=buf)
        np.subtract(tableau, buf, out=tableau)
        tableau[:, j] = 0.0
        tableau[r, j] = 1.0
        basis[r] = j
        iters += 1


def _certify(lp: LinearProgram, x: np.ndarray) -> None:
    tol = FEAS_TOL * (1.0 + (np.max(np.abs(lp.b)) if lp.b.size else 0.0))
    resid = lp.a @ x - lp.b if lp.nrows else np.zeros(0)
    bad = (
        np.any(resid[lp.senses == LE] > tol)
        or np.any(np.abs(resid[lp.senses == EQ]) > tol)
        or np.any(resid[lp.senses == GE] < -tol)
        or np.any(x < lp.lower - tol)
        or np.any(x > lp.upper + tol)
    )
    if bad:
        raise NumericalFailure("simplex returned an infeasible point; pivoting broke down")
