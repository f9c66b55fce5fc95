"""A thin, audit-friendly linear-programming layer.

Models carry human-readable names on every variable and constraint so a
failed plan can be inspected or dumped to the standard LP text format for
cross-checking with external solvers. Solving delegates to scipy's
in-process HiGHS backend, which is deterministic run-to-run for a fixed
model; the planners above this layer rely on that for reproducible actions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEAS_TOL = 1e-7


class LpError(RuntimeError):
    pass


class LinearProgram:
    """Maximization LP with bounded variables and named rows/columns."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self.var_names: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.objective: list[float] = []
        # constraints as parallel triplet lists
        self.con_names: list[str] = []
        self.con_sense: list[str] = []
        self.con_rhs: list[float] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_cons(self) -> int:
        return len(self.con_names)

    def add_var(self, name: str, low: float = 0.0, high: float = math.inf,
                obj: float = 0.0) -> int:
        if low > high:
            raise LpError(f"variable {name}: empty bound interval")
        self.var_names.append(name)
        self.lower.append(low)
        self.upper.append(high)
        self.objective.append(obj)
        return len(self.var_names) - 1

    def add_obj(self, var: int, coef: float) -> None:
        self.objective[var] += coef

    def add_constraint(self, name: str, coeffs: dict[int, float], sense: str,
                       rhs: float) -> int:
        if sense not in ("<=", ">=", "=="):
            raise LpError(f"constraint {name}: bad sense {sense!r}")
        row = len(self.con_names)
        self.con_names.append(name)
        self.con_sense.append(sense)
        self.con_rhs.append(rhs)
        for col, val in coeffs.items():
            if val:
                self._rows.append(row)
                self._cols.append(col)
                self._vals.append(val)
        return row

    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self._vals, (self._rows, self._cols)),
            shape=(self.n_cons, self.n_vars),
        )

    def to_lp_text(self) -> str:
        """Dump in the conventional LP text format (maximization form)."""
        a = self.matrix().tocsr()

        def term(coef: float, name: str) -> str:
            sign = "+" if coef >= 0 else "-"
            return f" {sign} {abs(coef):.12g} {name}"

        lines = ["\\ " + self.name, "Maximize", " obj:"]
        obj = "".join(term(c, v) for c, v in zip(self.objective, self.var_names) if c)
        lines[-1] += obj or " 0 " + (self.var_names[0] if self.var_names else "x0")
        lines.append("Subject To")
        for i in range(self.n_cons):
            row = a.getrow(i)
            body = "".join(term(val, self.var_names[col])
                           for col, val in zip(row.indices, row.data))
            op = {"<=": "<=", ">=": ">=", "==": "="}[self.con_sense[i]]
            lines.append(f" {self.con_names[i]}:{body or ' 0 ' + self.var_names[0]} "
                         f"{op} {self.con_rhs[i]:.12g}")
        lines.append("Bounds")
        for v, lo, hi in zip(self.var_names, self.lower, self.upper):
            lo_s = "-inf" if lo == -math.inf else f"{lo:.12g}"
            hi_s = "+inf" if hi == math.inf else f"{hi:.12g}"
            lines.append(f" {lo_s} <= {v} <= {hi_s}")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    status: str
    value: float
    x: np.ndarray
    max_residual: float = 0.0
    _names: dict[str, int] = field(default_factory=dict, repr=False)

    def __getitem__(self, name: str) -> float:
        return float(self.x[self._names[name]])


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve to optimality; infeasible and unbounded outcomes are signaled
    through ``status``, never as silent garbage values.
    """
    if lp.n_vars == 0:
        return LpSolution(status=OPTIMAL, value=0.0, x=np.zeros(0))
    a = lp.matrix()
    sense = np.array([{"<=": 1, ">=": -1, "==": 0}[s] for s in lp.con_sense])
    rhs = np.asarray(lp.con_rhs, dtype=float)
    ub_mask = sense != 0
    a_ub = sp.vstack([
        a[ub_mask & (sense == 1)],
        -a[ub_mask & (sense == -1)],
    ]).tocsr() if ub_mask.any() else None
    b_ub = np.concatenate([rhs[ub_mask & (sense == 1)],
                           -rhs[ub_mask & (sense == -1)]]) if ub_mask.any() else None
    eq_mask = sense == 0
    a_eq = a[eq_mask].tocsr() if eq_mask.any() else None
    b_eq = rhs[eq_mask] if eq_mask.any() else None

    c = -np.asarray(lp.objective, dtype=float)  # scipy minimizes
    bounds = [(lo if lo != -math.inf else None, hi if hi != math.inf else None)
              for lo, hi in zip(lp.lower, lp.upper)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status == 2:
        return LpSolution(status=INFEASIBLE, value=math.nan, x=np.zeros(lp.n_vars))
    if res.status == 3:
        return LpSolution(status=UNBOUNDED, value=math.inf, x=np.zeros(lp.n_vars))
    if res.status != 0:
        raise LpError(f"solver failure on {lp.name}: {res.message}")
    x = np.asarray(res.x, dtype=float)
    residual = _max_residual(a, sense, rhs, x)
    if residual > FEAS_TOL * max(1.0, float(np.abs(rhs).max(initial=0.0))):
        raise LpError(f"solution of {lp.name} violates constraints by {residual:g}")
    names = {n: i for i, n in enumerate(lp.var_names)}
    return LpSolution(status=OPTIMAL, value=-float(res.fun), x=x,
                      max_residual=residual, _names=names)


def _max_residual(a, sense, rhs, x) -> float:
    if a.shape[0] == 0:
        return 0.0
    ax = a @ x
    err = np.zeros_like(ax)
    le = sense == 1
    ge = sense == -1
    eq = sense == 0
    err[le] = np.maximum(0.0, ax[le] - rhs[le])
    err[ge] = np.maximum(0.0, rhs[ge] - ax[ge])
    err[eq] = np.abs(ax[eq] - rhs[eq])
    return float(err.max(initial=0.0))
