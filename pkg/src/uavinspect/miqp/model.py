"""Mixed-integer convex QP model container.

Objective convention: minimize 0.5 x'Qx + c'x with Q symmetric positive
semidefinite over the continuous variables (the 0.5 matches the MPS
quadratic-section convention, so exports are literal dumps).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

LE = "<="
GE = ">="
EQ = "="

_INF = float("inf")


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    GAP_LIMIT = "GapLimit"
    NODE_LIMIT = "NodeLimit"
    TIME_LIMIT = "TimeLimit"


@dataclass
class SolverConfig:
    """Branch-and-bound knobs; defaults suit exact desk-scale solving.

    ``gap_tol`` is the relative incumbent/bound gap at which the search
    stops early (status GapLimit); an exhausted tree reports Optimal.
    Branching is most-fractional (ties: lowest index), node selection
    best-bound (ties: FIFO).  With ``time_limit`` unset the search is
    fully deterministic.
    """

    feasibility_tol: float = 1e-6
    integrality_tol: float = 1e-6
    gap_tol: float = 1e-6
    node_limit: int = 200_000
    time_limit: float | None = None
    seed: int = 0
    heuristic_period: int = 8     # round-and-fix attempt every k-th node
    root_dive: bool = True        # constructive dive before the tree search
    qp_eps: float = 1e-9          # OSQP absolute/relative tolerance
    qp_max_iter: int = 60_000

    def __post_init__(self) -> None:
        if min(self.feasibility_tol, self.integrality_tol, self.gap_tol) <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class Solution:
    """Solver outcome; ``values`` is None when no feasible point exists."""

    status: Status
    values: np.ndarray | None = None
    objective: float | None = None
    gap: float = float("nan")
    nodes: int = 0
    best_bound: float = float("nan")

    def stats(self) -> dict:
        """JSON-friendly summary (no wall-clock times: reproducible)."""
        return {
            "status": self.status.value,
            "objective": self.objective,
            "gap": None if np.isnan(self.gap) else self.gap,
            "nodes": self.nodes,
            "best_bound": None if np.isnan(self.best_bound) else self.best_bound,
        }


class MiqpModel:
    """Incrementally built MIQP: bounded continuous + binary variables,
    linear rows, convex quadratic objective."""

    def __init__(self, name: str = "model") -> None:
        self.name = name
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._binary: list[bool] = []
        self._var_names: list[str] = []
        self._priority: list[int] = []
        self._row_idx: list[list[int]] = []
        self._row_coef: list[list[float]] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []
        self._quad: dict[tuple[int, int], float] = {}
        self._lin: dict[int, float] = {}

    # -- variables ---------------------------------------------------------

    @property
    def num_vars(self) -> int:
        return len(self._lb)

    @property
    def num_rows(self) -> int:
        return len(self._rhs)

    @property
    def var_names(self) -> list[str]:
        return list(self._var_names)

    @property
    def lb(self) -> np.ndarray:
        return np.array(self._lb)

    @property
    def ub(self) -> np.ndarray:
        return np.array(self._ub)

    def is_binary(self, idx: int) -> bool:
        return self._binary[idx]

    @property
    def binary_indices(self) -> np.ndarray:
        return np.nonzero(self._binary)[0]

    @property
    def priorities(self) -> np.ndarray:
        return np.array(self._priority, dtype=int)

    def add_continuous(self, name: str | None = None, lb: float = -_INF,
                       ub: float = _INF) -> int:
        if lb > ub:
            raise ValueError(f"empty domain for {name}: [{lb}, {ub}]")
        idx = self.num_vars
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._binary.append(False)
        self._var_names.append(name or f"x{idx}")
        self._priority.append(0)
        return idx

    def add_binary(self, name: str | None = None, priority: int = 0) -> int:
        idx = self.num_vars
        self._lb.append(0.0)
        self._ub.append(1.0)
        self._binary.append(True)
        self._var_names.append(name or f"b{idx}")
        self._priority.append(int(priority))
        return idx

    def set_branch_priority(self, idx: int, priority: int) -> None:
        """Higher-priority binaries are branched (and dived on) first;
        the default 0 leaves the pure most-fractional rule."""
        self._priority[idx] = int(priority)

    def set_rhs(self, row: int, rhs: float) -> None:
        """Replace a row's right-hand side in place.  Re-solving through
        a cached :class:`~uavinspect.miqp.solve.MiqpSolver` after rhs
        edits only requires ``refresh()``; the sparsity is untouched."""
        self._rhs[row] = float(rhs)

    # -- constraints and objective ------------------------------------------

    def add_constraint(self, coeffs, sense: str, rhs: float,
                       name: str | None = None) -> int:
        """Append one linear row; ``coeffs`` maps variable index to
        coefficient (dict or iterable of pairs)."""
        if sense not in (LE, GE, EQ):
            raise ValueError(f"unknown sense {sense!r}")
        items = coeffs.items() if isinstance(coeffs, dict) else list(coeffs)
        idxs, vals = [], []
        for j, a in items:
            if not 0 <= j < self.num_vars:
                raise ValueError(f"row references undeclared variable {j}")
            if a != 0.0:
                idxs.append(int(j))
                vals.append(float(a))
        row = self.num_rows
        self._row_idx.append(idxs)
        self._row_coef.append(vals)
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name or f"c{row}")
        return row

    def add_quadratic(self, i: int, j: int, coef: float) -> None:
        """Accumulate a term of 0.5 x'Qx: sets Q[i,j] (+= coef, kept
        symmetric).  Only continuous variables may carry curvature."""
        if self._binary[i] or self._binary[j]:
            raise ValueError("quadratic terms on binary variables "
                             "are not supported")
        key = (min(i, j), max(i, j))
        self._quad[key] = self._quad.get(key, 0.0) + float(coef)

    def add_linear(self, i: int, coef: float) -> None:
        self._lin[i] = self._lin.get(i, 0.0) + float(coef)

    def add_and(self, z: int, factors: list[int]) -> list[int]:
        """Force z = AND(factors) for binary z and factors: z <= f for
        every factor, and z >= sum(f) - (len-1)."""
        if not self._binary[z] or any(not self._binary[f] for f in factors):
            raise ValueError("add_and requires binary variables")
        rows = []
        for f in factors:
            rows.append(self.add_constraint({z: 1.0, f: -1.0}, LE, 0.0))
        coeffs = {f: -1.0 for f in factors}
        coeffs[z] = 1.0
        rows.append(self.add_constraint(coeffs, GE, 1.0 - len(factors)))
        return rows

    # -- matrix views ---------------------------------------------------------

    def rows_matrix(self) -> sp.csr_matrix:
        n = self.num_vars
        data, indices, indptr = [], [], [0]
        for idxs, vals in zip(self._row_idx, self._row_coef):
            indices.extend(idxs)
            data.extend(vals)
            indptr.append(len(indices))
        return sp.csr_matrix((data, indices, indptr),
                             shape=(self.num_rows, n))

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-row (lower, upper) in l <= Ax <= u form."""
        rhs = np.array(self._rhs)
        lo = np.where([s in (GE, EQ) for s in self._senses], rhs, -_INF)
        hi = np.where([s in (LE, EQ) for s in self._senses], rhs, _INF)
        return lo, hi

    def quadratic_matrix(self) -> sp.csc_matrix:
        n = self.num_vars
        ii, jj, vv = [], [], []
        for (i, j), v in self._quad.items():
            ii.append(i)
            jj.append(j)
            vv.append(v)
            if i != j:
                ii.append(j)
                jj.append(i)
                vv.append(v)
        return sp.csc_matrix((vv, (ii, jj)), shape=(n, n))

    def linear_cost(self) -> np.ndarray:
        q = np.zeros(self.num_vars)
        for i, v in self._lin.items():
            q[i] = v
        return q

    def check_psd(self, tol: float = 1e-8) -> None:
        """Reject indefinite objectives (smallest eigenvalue of the
        quadratic support block below -tol * ||Q||)."""
        if not self._quad:
            return
        support = sorted({i for ij in self._quad for i in ij})
        Q = self.quadratic_matrix().toarray()[np.ix_(support, support)]
        evals = np.linalg.eigvalsh(Q)
        scale = max(1e-300, float(np.abs(evals).max()))
        if evals[0] < -tol * scale:
            raise ValueError(f"objective not PSD: min eigenvalue {evals[0]}")

    def objective_value(self, x: np.ndarray) -> float:
        val = float(self.linear_cost() @ x)
        for (i, j), v in self._quad.items():
            if i == j:
                val += 0.5 * v * x[i] * x[i]
            else:
                val += v * x[i] * x[j]
        return val

    def max_violation(self, x: np.ndarray) -> float:
        """Worst constraint/bound/integrality violation of a point."""
        viol = float(np.max(np.maximum(self.lb - x, x - self.ub),
                            initial=0.0))
        A = self.rows_matrix()
        lo, hi = self.row_bounds()
        ax = A @ x
        viol = max(viol, float(np.max(np.maximum(lo - ax, ax - hi),
                                      initial=0.0)))
        for b in self.binary_indices:
            viol = max(viol, abs(x[b] - round(x[b])))
        return viol
