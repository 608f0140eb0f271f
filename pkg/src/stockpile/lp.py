"""Bounded-variable linear programming with exact duals.

Self-contained revised simplex over problems of the form

    min c'x   s.t.  a_i'x {<=, >=, =} b_i,   l <= x <= u,

returning the primal point, the objective, one dual per row, and reduced
costs. Duals follow the sensitivity convention: the dual of row i is the
derivative of the optimal objective in b_i. Under
minimization that makes the dual of a binding >= row nonnegative, of a
binding <= row nonpositive, and of an equality row sign-free.

The solver is deterministic: the same instance solved twice in one
process yields bit-identical results. Anti-cycling is handled by
switching from Dantzig pricing to Bland's rule after a run of 1000
degenerate pivots. Rows and columns are max-norm equilibrated
internally, so the stated tolerances apply to the scaled system; for
data of order one they coincide with the raw residuals.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotOptimal, NumericalFailure, UnknownVariable

LESS_EQUAL = "<="
GREATER_EQUAL = ">="
EQUAL = "="
_SENSES = (LESS_EQUAL, GREATER_EQUAL, EQUAL)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEASIBILITY_TOL = 1e-7
OPTIMALITY_TOL = 1e-7

# Internal pivot tolerances, applied to the equilibrated system.
_ENTER_TOL = 1e-9
_PIVOT_TOL = 1e-9
_DEGENERATE_STEP = 1e-10
_RATIO_TIE = 1e-9
_BLAND_TRIGGER = 1000
_REFACTOR_EVERY = 100


def _as_readonly(arr) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _index_array(seq) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(seq, dtype=np.intp))


@dataclass(frozen=True)
class LpInstance:
    """Immutable LP description with sparse rows and labeled components.

    Rows are stored as parallel tuples of index/value arrays. Use
    :class:`LpBuilder` for incremental construction and
    :func:`append_constraint` to derive a new instance with one extra row.
    """

    objective: np.ndarray
    row_cols: tuple
    row_vals: tuple
    senses: tuple
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    var_labels: tuple
    row_labels: tuple
    var_index: dict = field(repr=False, compare=False, default=None)
    row_index: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        n = len(self.var_labels)
        m = len(self.row_labels)
        if self.objective.shape != (n,) or self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("objective/bounds length does not match variable count")
        if self.rhs.shape != (m,) or len(self.senses) != m:
            raise ValueError("rhs/senses length does not match row count")
        if len(self.row_cols) != m or len(self.row_vals) != m:
            raise ValueError("row storage length does not match row count")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective coefficients must be finite")
        if not np.all(np.isfinite(self.rhs)):
            raise ValueError("rhs must be finite")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("bounds must not be NaN")
        if np.any(self.lower > self.upper):
            bad = int(np.argmax(self.lower > self.upper))
            raise ValueError(f"lower > upper for variable {self.var_labels[bad]!r}")
        for s in self.senses:
            if s not in _SENSES:
                raise ValueError(f"unknown row sense {s!r}")
        for cols, vals in zip(self.row_cols, self.row_vals):
            if len(cols) != len(vals):
                raise ValueError("row index/value length mismatch")
            if not np.all(np.isfinite(vals)):
                raise ValueError("row coefficients must be finite")
            if len(cols) and (cols.min() < 0 or cols.max() >= n):
                raise ValueError("row references an unknown variable index")
        if len(set(self.var_labels)) != n:
            raise ValueError("variable labels must be unique")
        if len(set(self.row_labels)) != m:
            raise ValueError("row labels must be unique")
        object.__setattr__(self, "var_index", {lab: j for j, lab in enumerate(self.var_labels)})
        object.__setattr__(self, "row_index", {lab: i for i, lab in enumerate(self.row_labels)})

    @property
    def n_vars(self) -> int:
        return len(self.var_labels)

    @property
    def n_rows(self) -> int:
        return len(self.row_labels)

    @classmethod
    def create(cls, objective, rows, senses, rhs, lower, upper, var_labels, row_labels):
        """Build an instance from plain sequences.

        ``rows`` is an iterable of ``(indices, values)`` pairs, one per row.
        """
        row_cols = tuple(_index_array(cols) for cols, _ in rows)
        row_vals = tuple(_as_readonly(vals) for _, vals in rows)
        return cls(
            objective=_as_readonly(objective),
            row_cols=row_cols,
            row_vals=row_vals,
            senses=tuple(senses),
            rhs=_as_readonly(rhs),
            lower=_as_readonly(lower),
            upper=_as_readonly(upper),
            var_labels=tuple(var_labels),
            row_labels=tuple(row_labels),
        )

    def dense_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_rows, self.n_vars))
        for i, (cols, vals) in enumerate(zip(self.row_cols, self.row_vals)):
            np.add.at(a[i], cols, vals)
        return a


class LpBuilder:
    """Incremental construction of an :class:`LpInstance`."""

    def __init__(self):
        self._cost = []
        self._lower = []
        self._upper = []
        self._var_labels = []
        self._var_index = {}
        self._row_cols = []
        self._row_vals = []
        self._senses = []
        self._rhs = []
        self._row_labels = []
        self._row_set = set()

    @property
    def n_vars(self) -> int:
        return len(self._var_labels)

    @property
    def n_rows(self) -> int:
        return len(self._row_labels)

    def add_variable(self, label: str, cost: float = 0.0,
                     lower: float = 0.0, upper: float = np.inf) -> int:
        if label in self._var_index:
            raise ValueError(f"duplicate variable label {label!r}")
        j = len(self._var_labels)
        self._var_index[label] = j
        self._var_labels.append(label)
        self._cost.append(float(cost))
        self._lower.append(float(lower))
        self._upper.append(float(upper))
        return j

    def variable_index(self, label: str) -> int:
        try:
            return self._var_index[label]
        except KeyError:
            raise UnknownVariable(f"unknown variable {label!r}") from None

    def add_to_cost(self, var, coef: float) -> None:
        j = var if isinstance(var, (int, np.integer)) else self.variable_index(var)
        self._cost[int(j)] += float(coef)

    def add_row(self, label: str, terms, sense: str, rhs: float) -> int:
        """Append one row. ``terms`` pairs a variable index or label with a
        coefficient; duplicate variables are coalesced by summing."""
        if label in self._row_set:
            raise ValueError(f"duplicate row label {label!r}")
        if sense not in _SENSES:
            raise ValueError(f"unknown row sense {sense!r}")
        acc = {}
        for var, coef in terms:
            j = int(var) if isinstance(var, (int, np.integer)) else self.variable_index(var)
            if not 0 <= j < len(self._var_labels):
                raise UnknownVariable(f"variable index {j} out of range")
            acc[j] = acc.get(j, 0.0) + float(coef)
        cols = sorted(acc)
        self._row_cols.append(_index_array(cols))
        self._row_vals.append(np.array([acc[j] for j in cols], dtype=float))
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_labels.append(label)
        self._row_set.add(label)
        return len(self._row_labels) - 1

    def build(self) -> LpInstance:
        return LpInstance.create(
            objective=self._cost,
            rows=list(zip(self._row_cols, self._row_vals)),
            senses=self._senses,
            rhs=self._rhs,
            lower=self._lower,
            upper=self._upper,
            var_labels=self._var_labels,
            row_labels=self._row_labels,
        )


def append_constraint(instance: LpInstance, terms, sense: str, rhs: float,
                      label: str | None = None) -> LpInstance:
    """Return a new instance with one extra row; the original is untouched.

    ``terms`` pairs variable labels (or indices) with coefficients.
    Raises :class:`UnknownVariable` for labels not present in the instance.
    """
    if sense not in _SENSES:
        raise ValueError(f"unknown row sense {sense!r}")
    acc = {}
    for var, coef in terms:
        if isinstance(var, (int, np.integer)):
            j = int(var)
            if not 0 <= j < instance.n_vars:
                raise UnknownVariable(f"variable index {j} out of range")
        else:
            if var not in instance.var_index:
                raise UnknownVariable(f"unknown variable {var!r}")
            j = instance.var_index[var]
        acc[j] = acc.get(j, 0.0) + float(coef)
    if label is None:
        label = f"r{instance.n_rows}"
    if label in instance.row_index:
        raise ValueError(f"duplicate row label {label!r}")
    cols = sorted(acc)
    return LpInstance(
        objective=instance.objective,
        row_cols=instance.row_cols + (_index_array(cols),),
        row_vals=instance.row_vals + (_as_readonly([acc[j] for j in cols]),),
        senses=instance.senses + (sense,),
        rhs=_as_readonly(np.append(instance.rhs, float(rhs))),
        lower=instance.lower,
        upper=instance.upper,
        var_labels=instance.var_labels,
        row_labels=instance.row_labels + (label,),
    )


def extend_rows(instance: LpInstance, rows) -> LpInstance:
    """Return a new instance with a batch of extra rows appended.

    ``rows`` is an iterable of ``(terms, sense, rhs, label)`` tuples in
    :func:`append_constraint` form. One call is much cheaper than a
    chain of single appends because the instance is rebuilt once.
    """
    new_cols = []
    new_vals = []
    new_senses = []
    new_rhs = []
    new_labels = []
    seen = set(instance.row_index)
    for terms, sense, rhs, label in rows:
        if sense not in _SENSES:
            raise ValueError(f"unknown row sense {sense!r}")
        acc = {}
        for var, coef in terms:
            if isinstance(var, (int, np.integer)):
                j = int(var)
                if not 0 <= j < instance.n_vars:
                    raise UnknownVariable(f"variable index {j} out of range")
            else:
                if var not in instance.var_index:
                    raise UnknownVariable(f"unknown variable {var!r}")
                j = instance.var_index[var]
            acc[j] = acc.get(j, 0.0) + float(coef)
        if label in seen:
            raise ValueError(f"duplicate row label {label!r}")
        seen.add(label)
        cols = sorted(acc)
        new_cols.append(_index_array(cols))
        new_vals.append(_as_readonly([acc[j] for j in cols]))
        new_senses.append(sense)
        new_rhs.append(float(rhs))
        new_labels.append(label)
    if not new_labels:
        return instance
    return LpInstance(
        objective=instance.objective,
        row_cols=instance.row_cols + tuple(new_cols),
        row_vals=instance.row_vals + tuple(new_vals),
        senses=instance.senses + tuple(new_senses),
        rhs=_as_readonly(np.concatenate([instance.rhs, new_rhs])),
        lower=instance.lower,
        upper=instance.upper,
        var_labels=instance.var_labels,
        row_labels=instance.row_labels + tuple(new_labels),
    )


def with_bounds(instance: LpInstance, indices, lower, upper) -> LpInstance:
    """Return a new instance with the bounds of ``indices`` replaced."""
    lo = np.array(instance.lower)
    hi = np.array(instance.upper)
    idx = _index_array(indices)
    lo[idx] = lower
    hi[idx] = upper
    lo.setflags(write=False)
    hi.setflags(write=False)
    return LpInstance(
        objective=instance.objective,
        row_cols=instance.row_cols,
        row_vals=instance.row_vals,
        senses=instance.senses,
        rhs=instance.rhs,
        lower=lo,
        upper=hi,
        var_labels=instance.var_labels,
        row_labels=instance.row_labels,
    )


@dataclass(frozen=True)
class LpSolution:
    """Result of a solve. Primal/dual data is populated only when optimal."""

    status: str
    objective: float | None
    primal: np.ndarray | None
    duals: np.ndarray | None
    reduced_costs: np.ndarray | None
    iterations: int
    instance: LpInstance = field(repr=False, compare=False)

    def _need_optimal(self):
        if self.status != OPTIMAL:
            raise NotOptimal(f"solution status is {self.status!r}")

    def value(self, label: str) -> float:
        self._need_optimal()
        return float(self.primal[self.instance.var_index[label]])

    def dual(self, label: str) -> float:
        self._need_optimal()
        return float(self.duals[self.instance.row_index[label]])

    def reduced_cost(self, label: str) -> float:
        self._need_optimal()
        return float(self.reduced_costs[self.instance.var_index[label]])


# basis status codes
_BASIC = 0
_AT_LOWER = 1
_AT_UPPER = 2
_FREE_NB = 3
_FIXED = 4


class _Simplex:
    """Working state for one solve of an equality-form bounded LP."""

    def __init__(self, a, b, c, lower, upper, max_pivots):
        self.a = a                  # dense m x n, slack columns included
        self.b = b
        self.c = c
        self.lower = lower.copy()
        self.upper = upper.copy()
        self.m, self.n = a.shape
        self.max_pivots = max_pivots
        self.pivots = 0
        self.degenerate_run = 0
        self.bland = False
        self.x = np.zeros(self.n)
        self.status = np.empty(self.n, dtype=np.int8)
        fixed = self.lower == self.upper
        fin_lo = np.isfinite(self.lower)
        fin_hi = np.isfinite(self.upper)
        self.status[:] = _FREE_NB
        self.status[fin_hi] = _AT_UPPER
        self.status[fin_lo] = _AT_LOWER
        self.status[fixed] = _FIXED
        self.x[self.status == _AT_LOWER] = self.lower[self.status == _AT_LOWER]
        self.x[self.status == _AT_UPPER] = self.upper[self.status == _AT_UPPER]
        self.x[fixed] = self.lower[fixed]
        self.basis = None
        self.binv = None

    # -- basis handling -------------------------------------------------

    def install_basis(self, basis):
        self.basis = np.asarray(basis, dtype=np.intp)
        self.status[self.basis] = _BASIC
        self.refactor()

    def refactor(self):
        bmat = self.a[:, self.basis]
        try:
            self.binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError:
            raise NumericalFailure("basis matrix is singular") from None
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = self.binv @ (self.b - self.a @ xn)

    # -- pricing --------------------------------------------------------

    def duals_and_reduced_costs(self):
        y = self.c[self.basis] @ self.binv
        z = self.c - y @ self.a
        return y, z

    def _entering(self, z):
        viol = np.zeros(self.n)
        at_lo = self.status == _AT_LOWER
        at_hi = self.status == _AT_UPPER
        free = self.status == _FREE_NB
        viol[at_lo] = np.maximum(0.0, -z[at_lo] - _ENTER_TOL)
        viol[at_hi] = np.maximum(0.0, z[at_hi] - _ENTER_TOL)
        viol[free] = np.maximum(0.0, np.abs(z[free]) - _ENTER_TOL)
        if not np.any(viol > 0.0):
            return -1, 0
        if self.bland:
            q = int(np.argmax(viol > 0.0))      # first eligible index
        else:
            q = int(np.argmax(viol))            # most violating, first on ties
        if self.status[q] == _AT_LOWER:
            direction = 1
        elif self.status[q] == _AT_UPPER:
            direction = -1
        else:
            direction = 1 if z[q] < 0.0 else -1
        return q, direction

    # -- pivoting -------------------------------------------------------

    def step(self, q, direction):
        """One ratio test plus pivot or bound flip. False means unbounded."""
        d = self.binv @ self.a[:, q]
        delta = -direction * d              # change of each basic per unit step
        xb = self.x[self.basis]
        lb = self.lower[self.basis]
        ub = self.upper[self.basis]
        limits = np.full(self.m, np.inf)
        dn = (delta < -_PIVOT_TOL) & np.isfinite(lb)
        up = (delta > _PIVOT_TOL) & np.isfinite(ub)
        if np.any(dn):
            limits[dn] = (xb[dn] - lb[dn]) / -delta[dn]
        if np.any(up):
            limits[up] = (ub[up] - xb[up]) / delta[up]
        limits = np.maximum(limits, 0.0)
        lim_min = limits.min() if self.m else np.inf
        if np.isfinite(self.lower[q]) and np.isfinite(self.upper[q]):
            t_flip = self.upper[q] - self.lower[q]
        else:
            t_flip = np.inf
        if not np.isfinite(min(lim_min, t_flip)):
            return False
        if t_flip <= lim_min:
            # bound flip: entering jumps to its other bound, basis unchanged
            self.x[self.basis] = xb + delta * t_flip
            self.x[q] = self.upper[q] if direction > 0 else self.lower[q]
            self.status[q] = _AT_UPPER if direction > 0 else _AT_LOWER
            self._count_step(t_flip)
            return True
        tie = limits <= lim_min + _RATIO_TIE * (1.0 + lim_min)
        usable = tie & (np.abs(d) > _PIVOT_TOL)
        cand = np.flatnonzero(usable if np.any(usable) else tie)
        r = int(cand[np.argmin(self.basis[cand])])
        t = limits[r]
        leaving = int(self.basis[r])
        if abs(d[r]) < _PIVOT_TOL:
            raise NumericalFailure("pivot element below tolerance")
        self.x[self.basis] = xb + delta * t
        self.x[q] = self.x[q] + direction * t
        if delta[r] < 0.0:
            self.x[leaving] = self.lower[leaving]
            self.status[leaving] = _AT_LOWER
        else:
            self.x[leaving] = self.upper[leaving]
            self.status[leaving] = _AT_UPPER
        if self.lower[leaving] == self.upper[leaving]:
            self.status[leaving] = _FIXED
        self.status[q] = _BASIC
        self.basis[r] = q
        # product-form update of the inverse
        pivrow = self.binv[r] / d[r]
        self.binv -= np.outer(d, pivrow)
        self.binv[r] = pivrow
        self._count_step(t)
        return True

    def _count_step(self, t):
        self.pivots += 1
        if t <= _DEGENERATE_STEP:
            self.degenerate_run += 1
            if self.degenerate_run >= _BLAND_TRIGGER:
                self.bland = True
        else:
            self.degenerate_run = 0
        if self.pivots % _REFACTOR_EVERY == 0:
            self.refactor()

    def run(self):
        """Iterate to optimality. Returns OPTIMAL or UNBOUNDED."""
        while True:
            if self.pivots > self.max_pivots:
                raise NumericalFailure(
                    f"pivot limit {self.max_pivots} exceeded "
                    f"(degenerate run {self.degenerate_run})")
            _, z = self.duals_and_reduced_costs()
            q, direction = self._entering(z)
            if q < 0:
                return OPTIMAL
            if not self.step(q, direction):
                return UNBOUNDED


def _scale(a_struct, b, c, lower, upper):
    """Two rounds of max-norm row/column equilibration.

    a_scaled[i, j] = a[i, j] / (r[i] * d[j]), which substitutes
    x_scaled = d * x. Hence b_scaled = b / r, bounds scale by d, costs
    scale by 1/d, the primal recovers as x_scaled / d, duals as
    y_scaled / r, and reduced costs as z_scaled * d.
    """
    a = a_struct.astype(float).copy()
    m, n = a.shape
    r = np.ones(m)
    d = np.ones(n)
    for _ in range(2):
        if m:
            rmax = np.abs(a).max(axis=1)
            rmax[rmax == 0.0] = 1.0
            rmax = np.clip(rmax, 1e-8, 1e8)
            r *= rmax
            a /= rmax[:, None]
            cmax = np.abs(a).max(axis=0)
        else:
            cmax = np.zeros(n)
        cmax[cmax == 0.0] = 1.0
        cmax = np.clip(cmax, 1e-8, 1e8)
        d *= cmax
        a /= cmax[None, :]
    b_s = b / r if m else b.astype(float).copy()
    with np.errstate(invalid="ignore"):
        lo_s = lower * d
        hi_s = upper * d
    c_s = c / d
    return a, b_s, c_s, lo_s, hi_s, r, d


def solve(instance: LpInstance, *, max_pivots: int | None = None) -> LpSolution:
    """Solve the instance and return status, primal, duals, reduced costs.

    Two-phase bounded-variable revised simplex. Infeasible and unbounded
    instances are reported by status alone. Raises
    :class:`NumericalFailure` if tolerances cannot be maintained.
    """
    m_all = instance.n_rows
    n = instance.n_vars

    # presolve: drop rows with no coefficients, checking constant feasibility
    a_full = instance.dense_matrix()
    keep = []
    for i in range(m_all):
        if len(instance.row_cols[i]) == 0 or not np.any(instance.row_vals[i]):
            rhs = instance.rhs[i]
            s = instance.senses[i]
            ok = ((s == LESS_EQUAL and rhs >= -FEASIBILITY_TOL)
                  or (s == GREATER_EQUAL and rhs <= FEASIBILITY_TOL)
                  or (s == EQUAL and abs(rhs) <= FEASIBILITY_TOL))
            if not ok:
                return LpSolution(INFEASIBLE, None, None, None, None, 0, instance)
        else:
            keep.append(i)
    keep = _index_array(keep)
    a_struct = a_full[keep]
    b = instance.rhs[keep].astype(float)
    senses = [instance.senses[i] for i in keep]
    m = len(keep)

    a_s, b_s, c_s, lo_s, hi_s, rscale, dscale = _scale(
        a_struct, b, instance.objective.astype(float), instance.lower, instance.upper)
    cost_scale = max(1.0, float(np.abs(c_s).max()) if n else 1.0)
    c_s = c_s / cost_scale

    if m == 0:
        # no rows: every variable sits at its cheaper bound
        x = np.where(c_s > 0.0, lo_s, np.where(c_s < 0.0, hi_s, np.where(
            np.isfinite(lo_s), lo_s, np.where(np.isfinite(hi_s), hi_s, 0.0))))
        if np.any(~np.isfinite(x)):
            return LpSolution(UNBOUNDED, None, None, None, None, 0, instance)
        primal = x / dscale
        obj = float(instance.objective @ primal)
        return LpSolution(OPTIMAL, obj, _as_readonly(primal),
                          _as_readonly(np.zeros(m_all)),
                          _as_readonly(instance.objective.copy()), 0, instance)

    # slack columns are exactly identity after scaling (their own column
    # scale cancels the row scale); bounds encode the row sense
    slack_lo = np.empty(m)
    slack_hi = np.empty(m)
    for i, s in enumerate(senses):
        if s == LESS_EQUAL:
            slack_lo[i], slack_hi[i] = 0.0, np.inf
        elif s == GREATER_EQUAL:
            slack_lo[i], slack_hi[i] = -np.inf, 0.0
        else:
            slack_lo[i], slack_hi[i] = 0.0, 0.0
    a_work = np.hstack([a_s, np.eye(m)])
    c_work = np.concatenate([c_s, np.zeros(m)])
    lo_work = np.concatenate([lo_s, slack_lo])
    hi_work = np.concatenate([hi_s, slack_hi])

    if max_pivots is None:
        max_pivots = 20000 + 200 * (m + n)

    sx = _Simplex(a_work, b_s, c_work, lo_work, hi_work, max_pivots)

    # initial point: nonbasics at bounds; rows whose residual fits inside the
    # slack bounds start with a basic slack, the rest get an artificial
    resid = b_s - a_work @ sx.x
    absorbable = (resid >= slack_lo - 1e-9) & (resid <= slack_hi + 1e-9)
    art_rows = np.flatnonzero(~absorbable)
    n_art = len(art_rows)
    if n_art:
        art_mat = np.zeros((m, n_art))
        art_sign = np.where(resid[art_rows] >= 0.0, 1.0, -1.0)
        art_mat[art_rows, np.arange(n_art)] = art_sign
        sx.a = np.hstack([sx.a, art_mat])
        sx.c = np.concatenate([sx.c, np.zeros(n_art)])
        sx.lower = np.concatenate([sx.lower, np.zeros(n_art)])
        sx.upper = np.concatenate([sx.upper, np.full(n_art, np.inf)])
        sx.x = np.concatenate([sx.x, np.zeros(n_art)])
        sx.status = np.concatenate([sx.status, np.full(n_art, _AT_LOWER, dtype=np.int8)])
        sx.n = sx.a.shape[1]

    basis = np.empty(m, dtype=np.intp)
    basis[:] = n + np.arange(m)                      # slack of each row
    for k, i in enumerate(art_rows):
        basis[i] = n + m + k
    sx.install_basis(basis)

    if n_art:
        # phase 1: minimize the artificial sum
        real_cost = sx.c
        phase1 = np.zeros(sx.n)
        phase1[n + m:] = 1.0
        sx.c = phase1
        if sx.run() != OPTIMAL:
            raise NumericalFailure("phase 1 terminated unbounded")
        art_sum = float(np.abs(sx.x[n + m:]).sum())
        if art_sum > FEASIBILITY_TOL * (1.0 + float(np.abs(b_s).max())):
            return LpSolution(INFEASIBLE, None, None, None, None,
                              sx.pivots, instance)
        # freeze artificials at zero, restore the real objective
        sx.c = real_cost
        sx.lower[n + m:] = 0.0
        sx.upper[n + m:] = 0.0
        nb_art = np.arange(n + m, sx.n)[sx.status[n + m:] != _BASIC]
        sx.status[nb_art] = _FIXED
        sx.x[nb_art] = 0.0
        sx.degenerate_run = 0
        sx.bland = False

    if sx.run() == UNBOUNDED:
        return LpSolution(UNBOUNDED, None, None, None, None, sx.pivots, instance)

    sx.refactor()
    y_s, z_s = sx.duals_and_reduced_costs()

    # verification on the scaled system
    resid = np.abs(sx.a @ sx.x - b_s)
    feas_ref = FEASIBILITY_TOL * (1.0 + float(np.abs(b_s).max()))
    if float(resid.max(initial=0.0)) > feas_ref:
        raise NumericalFailure(
            f"primal residual {resid.max():.3e} exceeds {feas_ref:.3e}")
    lo_ref = 1.0 + np.abs(np.where(np.isfinite(sx.lower), sx.lower, 0.0))
    hi_ref = 1.0 + np.abs(np.where(np.isfinite(sx.upper), sx.upper, 0.0))
    below = np.where(np.isfinite(sx.lower), sx.lower - sx.x, 0.0) / lo_ref
    above = np.where(np.isfinite(sx.upper), sx.x - sx.upper, 0.0) / hi_ref
    bound_viol = max(float(below.max(initial=0.0)), float(above.max(initial=0.0)))
    if bound_viol > 10.0 * FEASIBILITY_TOL:
        raise NumericalFailure(f"bound violation {bound_viol:.3e}")
    # snap within-tolerance drift onto the bounds so callers never see
    # a primal outside its declared box
    np.clip(sx.x, sx.lower, sx.upper, out=sx.x)

    # unscale
    primal = sx.x[:n] / dscale
    duals_kept = y_s * cost_scale / rscale
    duals = np.zeros(m_all)
    duals[keep] = duals_kept
    red = z_s[:n] * cost_scale * dscale
    obj = float(instance.objective @ primal)

    # strong duality on the original data
    dual_obj = float(duals_kept @ b)
    stat_n = sx.status[:n]
    at_lo = (stat_n == _AT_LOWER) | (stat_n == _FIXED)
    at_hi = stat_n == _AT_UPPER
    if np.any(at_lo):
        dual_obj += float(red[at_lo] @ instance.lower[at_lo])
    if np.any(at_hi):
        dual_obj += float(red[at_hi] @ instance.upper[at_hi])
    gap = abs(obj - dual_obj)
    if gap > 1e-6 * (1.0 + abs(obj) + abs(dual_obj)):
        raise NumericalFailure(f"duality gap {gap:.3e} on objective {obj:.6e}")

    return LpSolution(OPTIMAL, obj, _as_readonly(primal), _as_readonly(duals),
                      _as_readonly(red), sx.pivots, instance)


def dump_instance(instance: LpInstance, path) -> None:
    """Write a fixed-format text rendition for debugging.

    One variable per line (label, lower, upper, cost), then one row per
    line (label, sense, rhs, nonzeros as ``label:coef``).
    """
    with open(path, "w") as fh:
        fh.write(f"vars {instance.n_vars}\n")
        for j, lab in enumerate(instance.var_labels):
            fh.write(f"v {lab} {float(instance.lower[j])!r} "
                     f"{float(instance.upper[j])!r} "
                     f"{float(instance.objective[j])!r}\n")
        fh.write(f"rows {instance.n_rows}\n")
        for i, lab in enumerate(instance.row_labels):
            parts = " ".join(
                f"{instance.var_labels[c]}:{float(v)!r}"
                for c, v in zip(instance.row_cols[i], instance.row_vals[i]))
            fh.write(f"r {lab} {instance.senses[i]} "
                     f"{float(instance.rhs[i])!r} {parts}\n")
