"""Branch-and-bound MIQP solver over an OSQP relaxation engine.

One OSQP workspace is built per model structure; every node solve is a
warm-started bound update, so trees of thousands of nodes stay cheap.
``MiqpSolver`` keeps that workspace alive across repeated solves of the
same structure (receding-horizon re-solves only edit rhs terms), and
``solve_enumerate`` is the exhaustive oracle used to certify the tree
search on desk-scale instances.

Branching picks the most fractional binary, restricted to the highest
branch-priority class that still has fractional members (with no
priorities set this reduces to plain most-fractional; ties break to the
lowest variable index).  Node selection is best-bound with FIFO ties.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

import numpy as np
import osqp
import scipy.sparse as sp

from .model import MiqpModel, Solution, SolverConfig, Status

_INF = float("inf")


@dataclass
class _Compiled:
    """Array form of a model, shared by all node solves."""

    n: int
    A: sp.csr_matrix
    A_csc: sp.csc_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    P: sp.csc_matrix          # full symmetric
    q: np.ndarray
    lb0: np.ndarray
    ub0: np.ndarray
    bin_idx: np.ndarray
    priority: np.ndarray      # per binary (aligned with bin_idx)
    A_pos: sp.csr_matrix
    A_neg: sp.csr_matrix
    ent_rows: np.ndarray      # coo entries restricted to binary columns
    ent_cols: np.ndarray
    ent_vals: np.ndarray
    bin_cols: dict | None = None      # var index -> (rows, vals), lazy
    count_rows: list | None = None    # pure-binary all-ones rows, lazy

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        if self.bin_cols is None:
            self.bin_cols = {}
        if j not in self.bin_cols:
            col = self.A_csc.getcol(j).tocoo()
            self.bin_cols[j] = (col.row.copy(), col.data.copy())
        return self.bin_cols[j]

    def counting_rows(self) -> list:
        """Rows of the form lo <= sum(binaries) <= hi with unit
        coefficients: one-hot and cardinality structures whose members
        must be assigned jointly rather than one at a time."""
        if self.count_rows is None:
            is_bin = np.zeros(self.n, dtype=bool)
            is_bin[self.bin_idx] = True
            found = []
            csr = self.A
            for r in range(csr.shape[0]):
                sl = slice(csr.indptr[r], csr.indptr[r + 1])
                cols = csr.indices[sl]
                vals = csr.data[sl]
                if cols.size < 2 or cols.size > 64:
                    continue
                if np.all(vals == 1.0) and np.all(is_bin[cols]) and \
                        (np.isfinite(self.row_hi[r])
                         or np.isfinite(self.row_lo[r])):
                    found.append((r, cols.copy()))
            self.count_rows = found
        return self.count_rows

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * (x @ (self.P @ x)) + self.q @ x)

    def violation(self, x: np.ndarray, lb: np.ndarray, ub: np.ndarray
                  ) -> float:
        v = float(np.max(np.maximum(lb - x, x - ub), initial=0.0))
        if self.A.shape[0]:
            ax = self.A @ x
            v = max(v, float(np.max(np.maximum(self.row_lo - ax,
                                               ax - self.row_hi),
                                    initial=0.0)))
        return v


def _compile(model: MiqpModel) -> _Compiled:
    model.check_psd()
    A = model.rows_matrix()
    A.eliminate_zeros()
    row_lo, row_hi = model.row_bounds()
    P = model.quadratic_matrix()
    q = model.linear_cost()
    bin_idx = model.binary_indices
    A_pos = A.maximum(0)
    A_neg = A.minimum(0)
    coo = A.tocoo()
    is_bin = np.zeros(model.num_vars, dtype=bool)
    is_bin[bin_idx] = True
    mask = is_bin[coo.col]
    return _Compiled(
        n=model.num_vars, A=A, A_csc=A.tocsc(), row_lo=row_lo,
        row_hi=row_hi, P=P, q=q, lb0=model.lb, ub0=model.ub,
        bin_idx=bin_idx, priority=model.priorities[bin_idx],
        A_pos=A_pos, A_neg=A_neg, ent_rows=coo.row[mask],
        ent_cols=coo.col[mask], ent_vals=coo.data[mask])


def _tighten(comp: _Compiled, lb: np.ndarray, ub: np.ndarray,
             ftol: float = 1e-9, max_rounds: int = 6
             ) -> tuple[np.ndarray, np.ndarray] | None:
    """Activity-based bound tightening restricted to binary variables.

    Returns tightened copies, or None when some row is proven
    unsatisfiable over the current box.  This is the propagation engine:
    fixing one binary cascades through one-hot, AND-gate and aggregation
    rows here rather than in the QP.
    """
    lb = lb.copy()
    ub = ub.copy()
    if comp.A.shape[0] == 0:
        return lb, ub
    for _ in range(max_rounds):
        min_act = comp.A_pos @ lb + comp.A_neg @ ub
        max_act = comp.A_pos @ ub + comp.A_neg @ lb
        if (np.any(min_act > comp.row_hi + ftol)
                or np.any(max_act < comp.row_lo - ftol)):
            return None
        if comp.ent_rows.size == 0:
            return lb, ub
        r, c, a = comp.ent_rows, comp.ent_cols, comp.ent_vals
        changed = False

        # x_c <= (row_hi - min_act_without_c) / a for a > 0 (mirrored
        # for a < 0 and for lower bounds); only finite activities carry
        # information.
        cand_hi = np.full(r.shape, _INF)
        cand_lo = np.full(r.shape, -_INF)
        fin_min = np.isfinite(min_act[r]) & np.isfinite(comp.row_hi[r])
        fin_max = np.isfinite(max_act[r]) & np.isfinite(comp.row_lo[r])
        pos = a > 0
        neg = ~pos
        sel = fin_min & pos
        cand_hi[sel] = (comp.row_hi[r[sel]] - min_act[r[sel]]) / a[sel] \
            + lb[c[sel]]
        sel = fin_max & pos
        cand_lo[sel] = (comp.row_lo[r[sel]] - max_act[r[sel]]) / a[sel] \
            + ub[c[sel]]
        sel = fin_min & neg
        cand_lo[sel] = (comp.row_hi[r[sel]] - min_act[r[sel]]) / a[sel] \
            + ub[c[sel]]
        sel = fin_max & neg
        cand_hi[sel] = (comp.row_lo[r[sel]] - max_act[r[sel]]) / a[sel] \
            + lb[c[sel]]

        new_ub = ub.copy()
        np.minimum.at(new_ub, c, cand_hi)
        new_lb = lb.copy()
        np.maximum.at(new_lb, c, cand_lo)
        bi = comp.bin_idx
        if np.any(new_ub[bi] < -1e-7) or np.any(new_lb[bi] > 1.0 + 1e-7):
            return None
        fix0 = (new_ub[bi] < 1.0 - 1e-7) & (ub[bi] > 0.5)
        fix1 = (new_lb[bi] > 1e-7) & (lb[bi] < 0.5)
        if np.any(fix0):
            ub[bi[fix0]] = 0.0
            changed = True
        if np.any(fix1):
            lb[bi[fix1]] = 1.0
            changed = True
        if np.any(lb[bi] > ub[bi] + 1e-9):
            return None
        if not changed:
            break
    return lb, ub


class _Relaxation:
    """Persistent OSQP workspace; node solves are l/u vector updates."""

    def __init__(self, comp: _Compiled, cfg: SolverConfig) -> None:
        self.comp = comp
        n = comp.n
        self._stack = sp.vstack([comp.A, sp.identity(n, format="csr")],
                                format="csc")
        self._settings = dict(
            verbose=False, polish=True, polish_refine_iter=10,
            eps_abs=cfg.qp_eps, eps_rel=cfg.qp_eps,
            eps_prim_inf=1e-5, eps_dual_inf=1e-5,
            max_iter=cfg.qp_max_iter, scaling=10,
            adaptive_rho_interval=25, check_termination=25,
        )
        self._P = sp.triu(comp.P, format="csc")
        self._q = comp.q.copy()
        self._solver = self._fresh(comp.lb0, comp.ub0)
        self.fallbacks = 0
        self.solves = 0

    def _fresh(self, lb: np.ndarray, ub: np.ndarray) -> osqp.OSQP:
        solver = osqp.OSQP()
        solver.setup(P=self._P, q=self._q, A=self._stack,
                     l=np.concatenate([self.comp.row_lo, lb]),
                     u=np.concatenate([self.comp.row_hi, ub]),
                     **self._settings)
        return solver

    def refresh_q(self) -> None:
        if not np.array_equal(self._q, self.comp.q):
            self._q = self.comp.q.copy()
            self._solver.update(q=self._q)

    def solve(self, lb: np.ndarray, ub: np.ndarray
              ) -> tuple[str, float, np.ndarray | None]:
        """Returns (kind, value, x); kind in optimal/infeasible/unbounded."""
        l = np.concatenate([self.comp.row_lo, lb])
        u = np.concatenate([self.comp.row_hi, ub])
        self._solver.update(l=l, u=u)
        self.solves += 1
        res = self._solver.solve()
        kind = self._classify(res)
        if kind == "retry":
            # cold restart with a generous iteration budget
            self.fallbacks += 1
            solver = self._fresh(lb, ub)
            res = solver.solve()
            self._solver = solver
            kind = self._classify(res)
            if kind == "retry":
                x = res.x
                if x is not None and np.all(np.isfinite(x)) and \
                        self.comp.violation(x, lb, ub) <= 1e-6:
                    kind = "optimal"
                else:
                    kind = "infeasible"
        if kind != "optimal":
            return kind, _INF if kind == "infeasible" else -_INF, None
        x = res.x.copy()
        return "optimal", self.comp.objective(x), x

    @staticmethod
    def _classify(res) -> str:
        status = res.info.status
        if status.startswith("solved"):
            return "optimal"
        if "primal infeasible" in status:
            return "infeasible"
        if "dual infeasible" in status:
            return "unbounded"
        return "retry"


def _refine(comp: _Compiled, x: np.ndarray, lb: np.ndarray, ub: np.ndarray,
            atol: float = 1e-7) -> np.ndarray:
    """Active-set polish: re-solve the equality-pinned KKT system at the
    guessed active set; keeps the result only when it stays feasible and
    does not worsen the objective.  Dense, so skipped on large models
    (OSQP's own polish covers those)."""
    n = comp.n
    if n > 400:
        return x
    ax = comp.A @ x if comp.A.shape[0] else np.zeros(0)
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    scale = 1.0 + np.abs(ax).max(initial=0.0)
    for r in range(comp.A.shape[0]):
        if np.isfinite(comp.row_lo[r]) and \
                abs(ax[r] - comp.row_lo[r]) <= atol * scale:
            rows.append(comp.A.getrow(r).toarray().ravel())
            rhs.append(comp.row_lo[r])
        elif np.isfinite(comp.row_hi[r]) and \
                abs(ax[r] - comp.row_hi[r]) <= atol * scale:
            rows.append(comp.A.getrow(r).toarray().ravel())
            rhs.append(comp.row_hi[r])
    vscale = 1.0 + np.abs(x).max(initial=0.0)
    for j in range(n):
        pin = None
        if np.isfinite(lb[j]) and abs(x[j] - lb[j]) <= atol * vscale:
            pin = lb[j]
        elif np.isfinite(ub[j]) and abs(x[j] - ub[j]) <= atol * vscale:
            pin = ub[j]
        if pin is not None:
            e = np.zeros(n)
            e[j] = 1.0
            rows.append(e)
            rhs.append(pin)
    if not rows:
        return x
    E = np.array(rows)
    k = E.shape[0]
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = comp.P.toarray()
    kkt[:n, n:] = E.T
    kkt[n:, :n] = E
    full_rhs = np.concatenate([-comp.q, np.array(rhs)])
    try:
        sol, *_ = np.linalg.lstsq(kkt, full_rhs, rcond=None)
    except np.linalg.LinAlgError:
        return x
    cand = sol[:n]
    if not np.all(np.isfinite(cand)):
        return x
    if comp.violation(cand, lb, ub) <= 1e-8 * scale and \
            comp.objective(cand) <= comp.objective(x) \
            + 1e-12 * (1 + abs(comp.objective(x))):
        return cand
    return x


def _derive_binaries(comp: _Compiled, x: np.ndarray, lb: np.ndarray,
                     ub: np.ndarray) -> np.ndarray:
    """Choose values for still-free binaries one at a time (descending
    branch priority, then index), each taking the candidate that
    minimises the violation of its own rows given the current point;
    ties go to the rounded relaxation value.  This settles indicator
    binaries the relaxation leaves undetermined (plane-side and
    containment flags) against the actual continuous point.

    Members of counting rows (one-hots, cardinality caps) are assigned
    jointly: each member is scored by the violation its two candidate
    values cause in its *other* rows, and the in-window member count
    with the lowest total score wins.  The pass is iterated over the
    now-integral background until it stabilises."""
    x = x.copy()
    act = comp.A @ x if comp.A.shape[0] else np.zeros(0)

    def set_var(j: int, val: float) -> None:
        if abs(val - x[j]) > 1e-15:
            rows, vals = comp.column(j)
            for rr, aa in zip(rows, vals):
                act[rr] += aa * (val - x[j])
            x[j] = val

    def pen_of(j: int, val: float, skip_row: int = -1) -> float:
        rows, vals = comp.column(j)
        pen = 0.0
        for rr, aa in zip(rows, vals):
            if rr == skip_row:
                continue
            a_new = act[rr] + aa * (val - x[j])
            pen += max(0.0, comp.row_lo[rr] - a_new,
                       a_new - comp.row_hi[rr])
        return pen

    # snap the already-fixed binaries first
    for j in comp.bin_idx:
        if ub[j] - lb[j] < 0.5:
            set_var(j, lb[j])

    pos_of = {int(j): k for k, j in enumerate(comp.bin_idx)}
    groups = []
    grouped: set[int] = set()
    for r, cols in comp.counting_rows():
        members = [int(j) for j in cols
                   if ub[j] - lb[j] > 0.5 and int(j) not in grouped]
        if len(members) < 2:
            continue
        grouped.update(members)
        prio = max(comp.priority[pos_of[j]] for j in members)
        groups.append((prio, r, members))
    units: list = [(-prio, 0, r, members) for prio, r, members in groups]
    units += [(-int(comp.priority[k]), 1, int(j), None)
              for k, j in enumerate(comp.bin_idx)
              if ub[j] - lb[j] > 0.5 and int(j) not in grouped]
    units.sort(key=lambda t: (t[0], t[1], t[2]))

    for _ in range(4):
        changed = False
        for _, kind, key, members in units:
            if kind == 0:
                r = key
                # act already carries fixed members; base is their part
                base = act[r] - sum(x[j] for j in members)
                scores = [(pen_of(j, 1.0, r) - pen_of(j, 0.0, r), j)
                          for j in members]
                scores.sort(key=lambda t: (t[0], t[1]))
                lo_need = comp.row_lo[r] - base
                hi_need = comp.row_hi[r] - base
                n_min = 0 if not np.isfinite(lo_need) else \
                    max(0, int(np.ceil(lo_need - 1e-9)))
                n_max = len(members) if not np.isfinite(hi_need) else \
                    min(len(members), int(np.floor(hi_need + 1e-9)))
                if n_min > n_max:
                    n_min = n_max = max(0, min(len(members), n_min))
                best_n, best_tot = n_min, None
                prefix = 0.0
                totals = []
                for n1 in range(0, n_max + 1):
                    if n1 > 0:
                        prefix += scores[n1 - 1][0]
                    totals.append(prefix)
                for n1 in range(n_min, n_max + 1):
                    if best_tot is None or totals[n1] < best_tot - 1e-12:
                        best_tot, best_n = totals[n1], n1
                ones = {j for _, j in scores[:best_n]}
                for j in members:
                    val = 1.0 if j in ones else 0.0
                    if abs(val - x[j]) > 1e-15:
                        set_var(j, val)
                        changed = True
            else:
                j = key
                best_val, best_pen = None, None
                prefer = float(np.round(np.clip(x[j], 0.0, 1.0)))
                for val in (prefer, 1.0 - prefer):
                    pen = pen_of(j, val)
                    if best_pen is None or pen < best_pen - 1e-12:
                        best_val, best_pen = val, pen
                if abs(best_val - x[j]) > 1e-15:
                    set_var(j, best_val)
                    changed = True
        if not changed:
            break
    return x


def _verify_candidate(comp: _Compiled, relax: _Relaxation, lb: np.ndarray,
                      ub: np.ndarray, cfg: SolverConfig
                      ) -> tuple[float, np.ndarray] | None:
    """Solve with every binary pinned (bounds lb == ub on binaries) and
    accept only a verified-feasible point."""
    tightened = _tighten(comp, lb, ub)
    if tightened is None:
        return None
    lb, ub = tightened
    if np.any(lb[comp.bin_idx] > ub[comp.bin_idx]):
        return None
    kind, _, x = relax.solve(lb, ub)
    if kind != "optimal":
        return None
    x = _refine(comp, x, lb, ub)
    x[comp.bin_idx] = lb[comp.bin_idx]
    if comp.violation(x, comp.lb0, comp.ub0) <= cfg.feasibility_tol:
        return comp.objective(x), x
    return None


def _completion(comp: _Compiled, relax: _Relaxation, lb: np.ndarray,
                ub: np.ndarray, x_rel: np.ndarray, cfg: SolverConfig
                ) -> tuple[float, np.ndarray] | None:
    """Build a feasible incumbent from a relaxation point.

    Stage 1 pins every free binary at its rounding and re-optimises the
    continuous part.  When that collapses (undetermined indicators
    rounded against the eventual trajectory), stage 2 pins only the
    near-integral binaries, re-solves, and derives the rest from the
    re-solved point before the final verification solve.
    """
    bi = comp.bin_idx
    if bi.size == 0:
        return _verify_candidate(comp, relax, lb, ub, cfg)
    xb = np.clip(x_rel[bi], 0.0, 1.0)
    free = ub[bi] - lb[bi] > 0.5

    clb, cub = lb.copy(), ub.copy()
    sel = bi[free]
    clb[sel] = np.round(xb[free])
    cub[sel] = np.round(xb[free])
    cand = _verify_candidate(comp, relax, clb, cub, cfg)
    if cand is not None:
        return cand

    # stage 2: plain rounding misjudges indicator binaries (their
    # relaxed values ride near bounds vacuously), so settle every free
    # binary against the relaxation point instead
    derived = _derive_binaries(comp, x_rel, lb, ub)
    dlb, dub = lb.copy(), ub.copy()
    dlb[sel] = derived[sel]
    dub[sel] = derived[sel]
    return _verify_candidate(comp, relax, dlb, dub, cfg)


def _fractionality(xb: np.ndarray, free: np.ndarray) -> np.ndarray:
    """Distance from integrality per binary; fixed ones report -1."""
    frac = np.minimum(np.abs(xb), np.abs(1.0 - xb))
    frac[~free] = -1.0
    return frac


def _pick_branch(comp: _Compiled, frac: np.ndarray, itol: float) -> int:
    """Most fractional within the highest-priority class that still has
    fractional members; ties break to the lowest variable index."""
    cand = frac > itol
    if not np.any(cand):
        return int(np.argmax(frac))
    top = comp.priority[cand].max()
    restricted = np.where(cand & (comp.priority == top), frac, -1.0)
    return int(np.argmax(restricted))


def _row_disjoint_batch(comp: _Compiled, cls_positions: np.ndarray,
                        xb: np.ndarray) -> list[int]:
    """Greedy batch of same-class binaries sharing no constraint row,
    taken in descending relaxation value: pins inside one batch cannot
    conflict through a common row, so one QP validates them together."""
    order = cls_positions[np.argsort(-xb[cls_positions], kind="stable")]
    used_rows: set[int] = set()
    batch: list[int] = []
    for pos in order:
        j = comp.bin_idx[pos]
        rows = set(comp.column(j)[0].tolist())
        if rows & used_rows:
            continue
        used_rows |= rows
        batch.append(int(pos))
    return batch


def _dive(comp: _Compiled, relax: _Relaxation, lb: np.ndarray,
          ub: np.ndarray, x: np.ndarray, cfg: SolverConfig,
          cutoff: float) -> tuple[float, np.ndarray] | None:
    """Constructive dive to a first incumbent.

    Works down the branch-priority classes: per level, a row-disjoint
    batch of the top fractional class is pinned (largest relaxation
    values to 1 when clearly active, else to their rounding) and
    validated with one QP; on failure the level retries with only the
    single best variable, then with it flipped.  Once every
    positive-priority binary is integral, the remaining indicators are
    handed to the completion step.
    """
    lb = lb.copy()
    ub = ub.copy()
    bi = comp.bin_idx
    if bi.size == 0:
        return None
    max_levels = int(np.count_nonzero(comp.priority > 0)) + 8
    for _ in range(max_levels):
        xb = x[bi]
        free = ub[bi] - lb[bi] > 0.5
        frac = _fractionality(xb, free)
        decisive = frac > cfg.integrality_tol
        if np.any(comp.priority > 0):
            decisive &= comp.priority > 0
        if not np.any(decisive):
            return _completion(comp, relax, lb, ub, x, cfg)
        top = comp.priority[decisive].max()
        cls = np.nonzero(decisive & (comp.priority == top))[0]
        batch = _row_disjoint_batch(comp, cls, xb)
        leader = batch[0]

        def pin(positions: list[int], flip_leader: bool
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
            tlb, tub = lb.copy(), ub.copy()
            for pos in positions:
                val = 1.0 if xb[pos] >= 0.3 else 0.0
                if flip_leader and pos == leader:
                    val = 1.0 - val
                tlb[bi[pos]] = val
                tub[bi[pos]] = val
            tightened = _tighten(comp, tlb, tub)
            if tightened is None:
                return None
            kind, value, xx = relax.solve(*tightened)
            if kind == "optimal" and value < cutoff:
                return (*tightened, xx)
            return None

        solved = pin(batch, False)
        if solved is None and len(batch) > 1:
            solved = pin([leader], False)
        if solved is None:
            solved = pin([leader], True)
        if solved is None:
            return None
        lb, ub, x = solved
    return None


class MiqpSolver:
    """Reusable solving context bound to one model structure.

    After in-place rhs/bound edits on the model (``set_rhs``), call
    :meth:`refresh` and solve again: the OSQP factorisation is reused,
    which is what makes receding-horizon re-solves cheap.
    """

    def __init__(self, model: MiqpModel, config: SolverConfig | None = None
                 ) -> None:
        self.model = model
        self.cfg = config or SolverConfig()
        self.comp = _compile(model)
        self.relax = _Relaxation(self.comp, self.cfg)

    def refresh(self) -> None:
        """Re-read rhs, bounds and linear cost after model edits (the
        sparsity pattern must be unchanged)."""
        lo, hi = self.model.row_bounds()
        self.comp.row_lo = lo
        self.comp.row_hi = hi
        self.comp.lb0 = self.model.lb
        self.comp.ub0 = self.model.ub
        self.comp.q = self.model.linear_cost()
        self.relax.comp = self.comp
        self.relax.refresh_q()

    # -- public solves -------------------------------------------------------

    def solve_relaxation(self, fixed: dict[int, float] | None = None
                         ) -> Solution:
        lb, ub = self.comp.lb0.copy(), self.comp.ub0.copy()
        for idx, val in (fixed or {}).items():
            if not self.model.is_binary(idx):
                raise ValueError(f"fixed variable {idx} is not binary")
            lb[idx] = ub[idx] = float(val)
        kind, value, x = self.relax.solve(lb, ub)
        if kind == "infeasible":
            return Solution(status=Status.INFEASIBLE)
        if kind == "unbounded":
            raise ValueError("relaxation is unbounded")
        x = _refine(self.comp, x, lb, ub)
        val = self.comp.objective(x)
        return Solution(status=Status.OPTIMAL, values=x, objective=val,
                        gap=0.0, nodes=1, best_bound=val)

    def solve_bb(self) -> Solution:
        cfg, comp, relax = self.cfg, self.comp, self.relax
        start = time.monotonic()

        tightened = _tighten(comp, comp.lb0.copy(), comp.ub0.copy())
        if tightened is None:
            return Solution(status=Status.INFEASIBLE)
        root_lb, root_ub = tightened
        kind, root_val, x = relax.solve(root_lb, root_ub)
        if kind == "infeasible":
            return Solution(status=Status.INFEASIBLE)
        if kind == "unbounded":
            raise ValueError("relaxation is unbounded; add variable bounds")

        bi = comp.bin_idx
        inc_val = _INF
        inc_x: np.ndarray | None = None
        nodes = 1

        def try_incumbent(cand: tuple[float, np.ndarray] | None) -> None:
            nonlocal inc_val, inc_x
            if cand is not None and cand[0] < inc_val - 1e-12:
                inc_val, inc_x = cand

        def rel_gap(bound: float) -> float:
            if inc_val == _INF:
                return _INF
            return (inc_val - bound) / max(1.0, abs(inc_val))

        if bi.size == 0:
            x = _refine(comp, x, root_lb, root_ub)
            if comp.violation(x, comp.lb0, comp.ub0) <= cfg.feasibility_tol:
                return Solution(status=Status.OPTIMAL, values=x,
                                objective=comp.objective(x), gap=0.0,
                                nodes=1, best_bound=root_val)
            return Solution(status=Status.INFEASIBLE, nodes=1)

        # root heuristics: plain rounding, then a constructive dive
        try_incumbent(_completion(comp, relax, root_lb, root_ub, x, cfg))
        if cfg.root_dive and rel_gap(root_val) > cfg.gap_tol:
            try_incumbent(_dive(comp, relax, root_lb, root_ub, x, cfg,
                                cutoff=inc_val))

        heap: list = []
        tie = 0

        def push(bound: float, depth: int, blb: np.ndarray, bub: np.ndarray,
                 xb: np.ndarray) -> None:
            nonlocal tie
            heapq.heappush(heap, (bound, tie, depth, blb, bub, xb))
            tie += 1

        push(root_val, 0, root_lb[bi].astype(np.uint8),
             root_ub[bi].astype(np.uint8), x[bi].astype(np.float32))

        status = Status.OPTIMAL
        best_bound = root_val
        while heap:
            bound, _, depth, blb, bub, xb = heap[0]
            best_bound = bound
            if inc_x is not None and \
                    bound >= inc_val - 1e-9 * max(1.0, abs(inc_val)):
                heap.clear()
                status = Status.OPTIMAL
                break
            if inc_x is not None and rel_gap(bound) <= cfg.gap_tol:
                status = Status.GAP_LIMIT
                break
            if nodes >= cfg.node_limit:
                status = Status.NODE_LIMIT
                break
            if cfg.time_limit is not None and \
                    time.monotonic() - start > cfg.time_limit:
                status = Status.TIME_LIMIT
                break
            heapq.heappop(heap)

            lb = root_lb.copy()
            ub = root_ub.copy()
            lb[bi] = blb
            ub[bi] = bub
            xbf = xb.astype(np.float64)
            free = ub[bi] - lb[bi] > 0.5
            frac = _fractionality(xbf, free)
            j = _pick_branch(comp, frac, cfg.integrality_tol)
            for val in (0.0, 1.0):
                clb = lb.copy()
                cub = ub.copy()
                clb[bi[j]] = val
                cub[bi[j]] = val
                tightened = _tighten(comp, clb, cub)
                if tightened is None:
                    continue
                clb, cub = tightened
                kind, value, cx = relax.solve(clb, cub)
                nodes += 1
                if kind != "optimal":
                    continue
                value = max(value, bound)  # keep heap bounds monotone
                if inc_x is not None and \
                        value >= inc_val - 1e-9 * max(1.0, abs(inc_val)):
                    continue
                cfree = cub[bi] - clb[bi] > 0.5
                cfrac = _fractionality(cx[bi], cfree)
                if cfrac.max(initial=-1.0) <= cfg.integrality_tol:
                    try_incumbent(_completion(comp, relax, clb, cub, cx, cfg))
                    continue
                if nodes % max(1, cfg.heuristic_period) == 0:
                    try_incumbent(_completion(comp, relax, clb, cub, cx, cfg))
                push(value, depth + 1, clb[bi].astype(np.uint8),
                     cub[bi].astype(np.uint8), cx[bi].astype(np.float32))

        if not heap:
            best_bound = inc_val if inc_x is not None else _INF
        if inc_x is None:
            if status == Status.OPTIMAL:
                return Solution(status=Status.INFEASIBLE, nodes=nodes)
            return Solution(status=status, nodes=nodes, best_bound=best_bound)
        return Solution(status=status, values=inc_x, objective=inc_val,
                        gap=max(0.0, rel_gap(best_bound)), nodes=nodes,
                        best_bound=best_bound)

    def solve_enumerate(self) -> Solution:
        cfg, comp, relax = self.cfg, self.comp, self.relax
        nb = comp.bin_idx.size
        if nb > 20:
            raise ValueError(
                f"enumeration capped at 20 binaries, model has {nb}")
        best: tuple[float, np.ndarray] | None = None
        leaves = 0
        order = comp.bin_idx

        def rec(k: int, lb: np.ndarray, ub: np.ndarray) -> None:
            nonlocal best, leaves
            tightened = _tighten(comp, lb, ub, max_rounds=2)
            if tightened is None:
                return
            lb, ub = tightened
            while k < nb and lb[order[k]] == ub[order[k]]:
                k += 1
            if k == nb:
                leaves += 1
                kind, value, x = relax.solve(lb, ub)
                if kind != "optimal":
                    return
                x = _refine(comp, x, lb, ub)
                x[comp.bin_idx] = lb[comp.bin_idx]
                if comp.violation(x, comp.lb0, comp.ub0) \
                        > cfg.feasibility_tol:
                    return
                value = comp.objective(x)
                if best is None or value < best[0] - 1e-12:
                    best = (value, x)
                return
            j = order[k]
            for val in (0.0, 1.0):
                clb = lb.copy()
                cub = ub.copy()
                clb[j] = val
                cub[j] = val
                rec(k + 1, clb, cub)

        rec(0, comp.lb0.copy(), comp.ub0.copy())
        if best is None:
            return Solution(status=Status.INFEASIBLE, nodes=leaves)
        return Solution(status=Status.OPTIMAL, values=best[1],
                        objective=best[0], gap=0.0, nodes=leaves,
                        best_bound=best[0])


def solve_relaxation(model: MiqpModel, fixed: dict[int, float] | None = None
                     ) -> Solution:
    """One-shot convex relaxation (binaries in [0, 1] except those
    pinned by ``fixed``); the value bounds every integral completion of
    ``fixed`` from below."""
    return MiqpSolver(model).solve_relaxation(fixed)


def solve_bb(model: MiqpModel, config: SolverConfig | None = None
             ) -> Solution:
    """Best-bound branch-and-bound over the binary variables.

    Deterministic for a fixed config whenever the time limit does not
    trigger.  Infeasibility and budget outcomes are reported in the
    status, never raised."""
    return MiqpSolver(model, config).solve_bb()


def solve_enumerate(model: MiqpModel, config: SolverConfig | None = None
                    ) -> Solution:
    """Exact optimum by exhausting all binary assignments (hard cap 20),
    pruning assignments whose rows are unsatisfiable over the partial
    box."""
    return MiqpSolver(model, config).solve_enumerate()
