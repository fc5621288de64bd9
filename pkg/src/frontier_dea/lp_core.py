"""Dense two-phase simplex for small linear programs.

All variables are implicitly bounded below by zero. Pivoting follows Bland's
rule (smallest eligible index enters, smallest basic index leaves on ratio
ties), which guarantees termination on degenerate problems.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_TOLERANCE = 1e-9


class Sense(enum.Enum):
    MINIMIZE = "min"
    MAXIMIZE = "max"


class Relation(enum.Enum):
    LE = "<="
    EQ = "=="
    GE = ">="


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpValidationError(ValueError):
    """Raised for malformed programs (dimension or value errors)."""


class LpNumericalError(ArithmeticError):
    """The final basis failed verification against the unscaled program."""


@dataclass(frozen=True)
class Constraint:
    coefficients: tuple[float, ...]
    relation: Relation
    rhs: float

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(a) for a in self.coefficients))
        object.__setattr__(self, "rhs", float(self.rhs))
        if not isinstance(self.relation, Relation):
            object.__setattr__(self, "relation", Relation(self.relation))


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``sense`` c.x subject to ``a[i] . x (relations[i]) rhs[i]`` and x >= 0.

    Stored densely; build from row triples with :meth:`from_rows`.
    """

    sense: Sense
    objective: np.ndarray
    a: np.ndarray
    relations: tuple[Relation, ...]
    rhs: np.ndarray

    def __post_init__(self):
        c = np.array(self.objective, dtype=float).reshape(-1)
        n = c.size
        if n < 1:
            raise LpValidationError("program needs at least one variable")
        a = np.array(self.a, dtype=float)
        if a.size == 0:
            a = a.reshape(0, n)
        if a.ndim != 2 or a.shape[1] != n:
            raise LpValidationError(
                f"constraint matrix has shape {a.shape}, expected (k, {n})")
        rhs = np.array(self.rhs, dtype=float).reshape(-1)
        relations = tuple(Relation(r) for r in self.relations)
        if not rhs.size == len(relations) == a.shape[0]:
            raise LpValidationError("constraint rows, relations and rhs differ in length")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(a)) and np.all(np.isfinite(rhs))):
            raise LpValidationError("non-finite coefficient in program")
        for arr in (c, a, rhs):
            arr.flags.writeable = False
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "relations", relations)

    @classmethod
    def from_rows(cls, sense: Sense, objective: Sequence[float], rows=(),
                  variable_count: int | None = None) -> "LinearProgram":
        """Build from ``(coefficients, relation, rhs)`` triples or :class:`Constraint`."""
        n = len(objective) if variable_count is None else variable_count
        if len(objective) != n:
            raise LpValidationError(f"objective has {len(objective)} coefficients, expected {n}")
        rows = [r if isinstance(r, Constraint) else Constraint(*r) for r in rows]
        for i, r in enumerate(rows):
            if len(r.coefficients) != n:
                raise LpValidationError(
                    f"constraint {i} has {len(r.coefficients)} coefficients, expected {n}")
        a = np.array([r.coefficients for r in rows], dtype=float).reshape(len(rows), n)
        return cls(sense, objective, a, tuple(r.relation for r in rows), [r.rhs for r in rows])

    @property
    def variable_count(self) -> int:
        return self.objective.size

    @property
    def constraints(self) -> tuple[Constraint, ...]:
        return tuple(Constraint(row, rel, b)
                     for row, rel, b in zip(self.a, self.relations, self.rhs))

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Writable copies of the constraint matrix and right-hand side."""
        return self.a.copy(), self.rhs.copy()


@dataclass(frozen=True)
class LpSolution:
    status: Status
    objective_value: float | None = None
    variable_values: tuple[float, ...] | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def check_feasible(lp: LinearProgram, point: Sequence[float],
                   tolerance: float = DEFAULT_TOLERANCE) -> bool:
    """True iff ``point`` satisfies every constraint and x >= 0.

    Violations are measured relative to the magnitude of the terms in each
    row, ``max(1, |rhs|, sum |a_j x_j|)``, so that large monetary data is not
    held to a tighter standard than its own rounding error.
    """
    x = np.asarray(point, dtype=float)
    if x.shape != (lp.variable_count,):
        raise LpValidationError(
            f"point has length {x.size}, expected {lp.variable_count}")
    if tolerance <= 0:
        raise LpValidationError("tolerance must be positive")
    if np.any(x < -tolerance):
        return False
    for row, rel, rhs in zip(lp.a, lp.relations, lp.rhs):
        lhs = float(row @ x)
        slack = tolerance * max(1.0, abs(rhs), float(np.abs(row * x).sum()))
        if rel is Relation.LE and lhs > rhs + slack:
            return False
        if rel is Relation.GE and lhs < rhs - slack:
            return False
        if rel is Relation.EQ and abs(lhs - rhs) > slack:
            return False
    return True


class _Tableau:
    """Tableau over the standard-form system ``A z = b``, z >= 0.

    ``T`` holds ``B^-1 [A | b]`` on top and the reduced-cost row last. The
    original ``A`` and ``b`` are kept so the tableau can be rebuilt from the
    current basis, which stops round-off from accumulating across pivots.
    """

    REFACTOR_EVERY = 32
    REL_PIVOT = 1e-8

    def __init__(self, a: np.ndarray, b: np.ndarray, basis: list[int], tol: float):
        self.a = a
        self.b = b
        self.basis = basis
        self.tol = tol
        self.pivots = 0
        self.refactor_every = self.REFACTOR_EVERY
        self.slack = tol  # ratio-test allowance, 0 for the textbook test
        self.cost = np.zeros(a.shape[1])
        self.T = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
        if a.shape[0] and np.array_equal(a[:, basis], np.eye(a.shape[0])):
            # slack/artificial starting basis: B is the identity
            self.T[:-1, :-1] = a
            self.T[:-1, -1] = b
            self._price()
        else:
            self.refactor()

    def set_cost(self, cost: np.ndarray) -> None:
        self.cost = cost
        self._price()

    def _price(self) -> None:
        T, m = self.T, self.a.shape[0]
        T[-1, :-1] = self.cost
        T[-1, -1] = 0.0
        if m:
            T[-1] -= self.cost[self.basis] @ T[:m]

    def refactor(self) -> None:
        m = self.a.shape[0]
        if m:
            B = self.a[:, self.basis]
            self.T[:m] = np.linalg.solve(B, np.column_stack([self.a, self.b]))
            body = self.T[:m]
            body[np.abs(body) < self.tol * 1e-3] = 0.0
            for i, j in enumerate(self.basis):
                body[:, j] = 0.0
                body[i, j] = 1.0
        self._price()

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        colvals = T[:, col].copy()
        colvals[row] = 0.0
        T -= colvals[:, None] * T[row]
        T[:, col] = 0.0
        T[row, col] = 1.0
        self.basis[row] = col
        self.pivots += 1
        if self.pivots % self.refactor_every == 0:
            self.refactor()

    def drop(self, rows: list[int], cols: slice | None = None) -> None:
        if not rows and cols is not None and not any(
                j in range(*cols.indices(self.a.shape[1])) for j in self.basis):
            # nothing basic is removed, so B^-1 is unchanged
            self.a = np.delete(self.a, cols, axis=1)
            self.cost = np.delete(self.cost, cols)
            self.T = np.delete(self.T, cols, axis=1)
            return
        keep = [i for i in range(self.a.shape[0]) if i not in rows]
        self.a, self.b = self.a[keep], self.b[keep]
        self.basis = [self.basis[i] for i in keep]
        if cols is not None:
            self.a = np.delete(self.a, cols, axis=1)
            self.cost = np.delete(self.cost, cols)
        self.T = np.zeros((self.a.shape[0] + 1, self.a.shape[1] + 1))
        self.refactor()

    def run(self, eligible: int, max_pivots: int) -> Status:
        """Minimise the cost row over the first ``eligible`` columns (Bland)."""
        tol = self.tol
        skipped: set[int] = set()
        while True:
            T = self.T
            m = T.shape[0] - 1
            candidates = (T[-1, :eligible] < -tol).nonzero()[0]
            col = next((int(j) for j in candidates if j not in skipped), None)
            if col is None:
                return Status.OPTIMAL
            column = T[:m, col]
            top = column.max(initial=0.0)
            if top <= tol:
                return Status.UNBOUNDED
            threshold = max(tol, self.REL_PIVOT * max(top, -column.min()))
            if top <= threshold:
                # only tiny positive entries: no safe pivot in this column,
                # but not a reliable ray either, so price the next one
                skipped.add(col)
                continue
            skipped.clear()
            # Two-pass ratio test. Every positive entry bounds the step (with
            # a slack); inside that bound Bland's rule picks among the rows
            # whose pivot is large enough to be safe.
            rows = (column > tol).nonzero()[0]
            if rows.size == 1:
                row = int(rows[0])
            else:
                pivots = column[rows]
                ratios = np.maximum(T[rows, -1], 0.0) / pivots
                step = (ratios + self.slack / pivots).min()
                window = ratios <= step
                safe = rows[window & (pivots > threshold)]
                if safe.size:
                    row = min(safe.tolist(), key=self.basis.__getitem__)
                else:
                    row = int(rows[window][pivots[window].argmax()])
            self.pivot(row, col)
            if self.pivots > max_pivots:
                raise LpNumericalError("simplex pivot limit exceeded")

    def primal(self) -> np.ndarray:
        z = np.zeros(self.a.shape[1])
        z[self.basis] = self.T[:-1, -1]
        return z


def _equilibrate(a: np.ndarray, passes: int = 4) -> np.ndarray:
    """Column factors from alternating geometric-mean row/column scaling.

    Row factors are discarded: rows get normalised separately afterwards.
    """
    mag = np.abs(a)
    nz = mag > 0
    if not nz.any():
        return np.ones(a.shape[1])
    logs = np.log2(np.where(nz, mag, 1.0))
    if logs[nz].max() - logs[nz].min() <= 8:
        # within a factor of 256 already; scaling would buy nothing
        return np.ones(a.shape[1])
    r = np.zeros(a.shape[0])
    col = np.zeros(a.shape[1])

    # zeros are masked with -inf/+inf so they never set a max/min
    upper = np.where(nz, logs, -np.inf)
    lower = np.where(nz, logs, np.inf)

    def centre(axis):
        shift = r[:, None] + col[None, :]
        present = nz.any(axis=axis)
        hi = np.where(present, (upper + shift).max(axis=axis), 0.0)
        lo = np.where(present, (lower + shift).min(axis=axis), 0.0)
        return (hi + lo) / 2

    for _ in range(passes):
        dr = centre(1)
        r -= dr
        dc = centre(0)
        col -= dc
        if max(np.abs(dr).max(), np.abs(dc).max()) < 0.5:
            break
    # powers of two keep the scaling itself exact
    return np.exp2(np.round(col))


def solve(lp: LinearProgram, tolerance: float = DEFAULT_TOLERANCE) -> LpSolution:
    """Solve ``lp`` with the two-phase simplex method.

    Deterministic: identical inputs give identical outputs. Only the objective
    value is unique at degenerate optima; ``variable_values`` is whichever
    optimal basic solution the pivot sequence reaches.

    An optimal point is checked against the original rows; if round-off has
    broken feasibility the solve is repeated with an exact ratio test and the
    tableau rebuilt after every pivot, and :class:`LpNumericalError` is raised
    if that fails too.
    """
    if tolerance <= 0:
        raise LpValidationError("tolerance must be positive")
    sol = _solve(lp, tolerance, _Tableau.REFACTOR_EVERY, tolerance)
    if sol.optimal and not check_feasible(lp, sol.variable_values, tolerance):
        sol = _solve(lp, tolerance, 1, 0.0)
        if not sol.optimal or not check_feasible(lp, sol.variable_values, tolerance):
            raise LpNumericalError("simplex lost feasibility; data too badly scaled")
    return sol


def _solve(lp: LinearProgram, tolerance: float, refactor_every: int, slack: float) -> LpSolution:
    n = lp.variable_count
    a, b = lp.matrix()
    relations = list(lp.relations)
    c = lp.objective.copy()
    if lp.sense is Sense.MAXIMIZE:
        c = -c

    col_scale = _equilibrate(a)
    a = a * col_scale
    c = c * col_scale

    # Rows: divide by the largest coefficient, then make every rhs >= 0.
    keep = []
    for i in range(a.shape[0]):
        scale = np.abs(a[i]).max()
        if scale <= tolerance:
            rel, rhs = relations[i], b[i]
            ok = ((rel is Relation.LE and rhs >= -tolerance)
                  or (rel is Relation.GE and rhs <= tolerance)
                  or (rel is Relation.EQ and abs(rhs) <= tolerance))
            if not ok:
                return LpSolution(Status.INFEASIBLE)
            continue
        a[i] /= scale
        b[i] /= scale
        if b[i] < 0:
            a[i], b[i] = -a[i], -b[i]
            relations[i] = {Relation.LE: Relation.GE, Relation.GE: Relation.LE}.get(
                relations[i], Relation.EQ)
        keep.append(i)
    a, b = a[keep], b[keep]
    relations = [relations[i] for i in keep]
    m = len(keep)

    # Standard form: x | slack/surplus | artificial.
    n_slack = sum(r is not Relation.EQ for r in relations)
    n_art = sum(r is not Relation.LE for r in relations)
    width = n + n_slack + n_art
    A = np.zeros((m, width))
    A[:, :n] = a
    basis = [0] * m
    s, art = n, n + n_slack
    for i, rel in enumerate(relations):
        if rel is Relation.LE:
            A[i, s] = 1.0
            basis[i] = s
            s += 1
        else:
            if rel is Relation.GE:
                A[i, s] = -1.0
                s += 1
            A[i, art] = 1.0
            basis[i] = art
            art += 1
    tab = _Tableau(A, b, basis, tolerance)
    tab.refactor_every = refactor_every
    tab.slack = slack
    max_pivots = 200 * (m + width + 1)
    real = n + n_slack

    if n_art:
        phase1 = np.zeros(width)
        phase1[real:] = 1.0
        tab.set_cost(phase1)
        tab.run(real, max_pivots)
        tab.refactor()
        if -tab.T[-1, -1] > tolerance * 1e3 * max(1.0, float(b.max(initial=0.0))):
            return LpSolution(Status.INFEASIBLE, iterations=tab.pivots)
        # Drive zero-level artificials out of the basis; rows with no
        # eligible entry are linearly dependent and get dropped.
        redundant = []
        for i in range(len(tab.basis)):
            if tab.basis[i] >= real:
                row = tab.T[i, :real]
                cands = np.flatnonzero(np.abs(row) > max(tolerance, 1e-7 * np.abs(row).max(initial=0.0)))
                if cands.size:
                    tab.pivot(i, int(cands[np.argmax(np.abs(row[cands]))]))
                else:
                    redundant.append(i)
        tab.drop(redundant, np.s_[real:width])

    cost = np.zeros(real)
    cost[:n] = c
    tab.set_cost(cost)
    status = tab.run(real, max_pivots)
    if status is Status.UNBOUNDED:
        return LpSolution(Status.UNBOUNDED, iterations=tab.pivots)
    tab.refactor()

    # round-off is cleaned in the scaled space the tolerances refer to
    z = tab.primal()[:n]
    z[np.abs(z) < tolerance] = 0.0
    x = np.maximum(z, 0.0) * col_scale
    values = tuple(float(v) for v in x)
    objective = float(lp.objective @ x)
    return LpSolution(Status.OPTIMAL, objective, values, tab.pivots)
