"""Compile one receding-horizon inspection planning instance into a
mixed-integer QP, and decode solver output back into trajectory terms.

Constraint groups, in emission order: behavioural (Hankel) coupling of
the planned input/output window to the initialisation window; inspection
value dynamics with memory; per-facet FOV-containment indicators in
big-M form with back-face-inadmissible pairs pruned away; AND-gating of
containment with the single active camera orientation; convex-hull
collision avoidance via plane-side indicators; and the smoothness-minus-
reward objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .excitation import HankelBlocks
from .geometry import FovOrientation, HalfSpaceHull, TargetSet, point_in_fov
from .miqp import EQ, GE, LE, MiqpModel, Solution, SolverConfig, Status


class PlanError(ValueError):
    """Raised on malformed planning inputs or undecodable solutions."""


@dataclass
class PlanningConfig:
    """Sizing, weights and boxes of one planning instance."""

    past_len: int = 1
    horizon: int = 8
    effort_weight: float = 5e-3
    reward_weight: float = 15.0
    input_lo: np.ndarray = field(
        default_factory=lambda: np.array([-3.0, -2.0, -2.0, -2.0]))
    input_hi: np.ndarray = field(
        default_factory=lambda: np.array([3.0, 2.0, 2.0, 2.0]))
    workspace_lo: np.ndarray = field(
        default_factory=lambda: np.full(3, -50.0))
    workspace_hi: np.ndarray = field(
        default_factory=lambda: np.full(3, 50.0))
    margin: float = 1e-3          # clearance slack standing in for strict >
    big_m_floor: float = 1e3
    g_bound: float = 1e6          # box on the Hankel combination weights
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self) -> None:
        if self.past_len < 1 or self.horizon < 1:
            raise PlanError("past_len and horizon must be >= 1")
        if self.effort_weight <= 0 or self.reward_weight <= 0:
            raise PlanError("objective weights must be positive")
        if not (np.all(np.isfinite(self.workspace_lo))
                and np.all(np.isfinite(self.workspace_hi))
                and np.all(self.workspace_lo < self.workspace_hi)):
            raise PlanError("workspace box must be bounded and non-empty")


@dataclass
class PlanInputs:
    """Scene- and state-dependent data feeding one compile call."""

    blocks: HankelBlocks
    window_u: np.ndarray                  # m x K, oldest column first
    window_y: np.ndarray                  # p x K
    memory: np.ndarray                    # (I,) 0/1 inspected-before flags
    carried: np.ndarray                   # (I,) inspection values carried over
    orientations: list[FovOrientation]
    admissible: np.ndarray                # (I, Phi) back-face table
    targets: TargetSet
    target_centroids: np.ndarray          # I x 3
    hull: HalfSpaceHull
    position_rows: tuple[int, int, int]   # position components within y

    def __post_init__(self) -> None:
        if np.any((self.memory > 0.5) & (self.carried < 1.0 - 1e-9)):
            raise PlanError("inspected facets must carry a full value")


@dataclass
class PlanSolution:
    """Decoded plan over the horizon (tau = 0 .. N-1)."""

    inputs: np.ndarray          # m x N
    outputs: np.ndarray         # p x N
    positions: np.ndarray       # 3 x N
    gamma: np.ndarray           # I x N int
    omega: np.ndarray           # (N,) active orientation subset position
    xi_final: np.ndarray        # (I,)
    xi_next: np.ndarray         # (I,) value after the first step
    objective: float
    status: Status
    solver: Solution


@dataclass
class CompiledPlan:
    model: MiqpModel
    cfg: PlanningConfig
    inp: PlanInputs
    g_vars: np.ndarray          # (Tc,)
    u_vars: np.ndarray          # N x m
    y_vars: np.ndarray          # N x p
    xi_vars: np.ndarray         # I x (N+1)
    gain_vars: np.ndarray       # I x N
    gamma_vars: np.ndarray      # I x N
    psi_vars: dict              # (i, phi) -> (N,) array
    face_vars: dict             # (i, phi) -> 5 x N array
    hit_vars: dict              # (i, phi) -> (N,) array
    omega_vars: np.ndarray      # Phi x N
    overlap_vars: np.ndarray    # J x N
    init_u_rows: np.ndarray | None = None    # K x m row indices
    init_y_rows: np.ndarray | None = None    # K x p
    carry_rows: np.ndarray | None = None     # (I,)
    gain_cap_rows: np.ndarray | None = None  # I x N

    def update_inputs(self, window_u: np.ndarray, window_y: np.ndarray,
                      memory: np.ndarray, carried: np.ndarray) -> None:
        """Point the compiled model at a new initialisation window and
        inspection state; only right-hand sides change, so a cached
        solver context stays valid after ``refresh()``."""
        K = self.cfg.past_len
        for k in range(K):
            for c in range(window_u.shape[0]):
                self.model.set_rhs(int(self.init_u_rows[k, c]),
                                   float(window_u[c, k]))
            for r in range(window_y.shape[0]):
                self.model.set_rhs(int(self.init_y_rows[k, r]),
                                   float(window_y[r, k]))
        for i in range(self.inp.targets.count):
            self.model.set_rhs(int(self.carry_rows[i]), float(carried[i]))
            for t in range(self.cfg.horizon):
                self.model.set_rhs(int(self.gain_cap_rows[i, t]),
                                   float(memory[i]))
        self.inp.window_u = window_u.copy()
        self.inp.window_y = window_y.copy()
        self.inp.memory = memory.copy()
        self.inp.carried = carried.copy()

    def variable_map(self) -> dict:
        """Column name/index dump for debugging and oracle checks."""
        names = self.model.var_names
        return {
            "columns": {name: j for j, name in enumerate(names)},
            "census": {
                "data_weight": int(self.g_vars.size),
                "input": int(self.u_vars.size),
                "output": int(self.y_vars.size),
                "insp_value": int(self.xi_vars.size),
                "insp_gain": int(self.gain_vars.size),
                "inspect": int(self.gamma_vars.size),
                "in_fov": int(sum(v.size for v in self.psi_vars.values())),
                "fov_face": int(sum(v.size for v in self.face_vars.values())),
                "hit": int(sum(v.size for v in self.hit_vars.values())),
                "view": int(self.omega_vars.size),
                "overlap": int(self.overlap_vars.size),
            },
        }


def _box_max(coef: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    """max of coef . x over the box [lo, hi]."""
    return float(np.sum(np.maximum(coef * lo, coef * hi)))


def compile_plan(cfg: PlanningConfig, inp: PlanInputs) -> CompiledPlan:
    """Build the MIQP for one planning step."""
    blocks = inp.blocks
    K, N = cfg.past_len, cfg.horizon
    if blocks.past_len != K or blocks.horizon != N:
        raise PlanError("Hankel blocks sized for a different (K, N)")
    m, p, Tc = blocks.m, blocks.p, blocks.width
    if inp.window_u.shape != (m, K) or inp.window_y.shape != (p, K):
        raise PlanError("initialisation window has wrong shape")
    if not inp.orientations:
        raise PlanError("orientation subset must not be empty")
    I = inp.targets.count
    Phi = len(inp.orientations)
    if inp.admissible.shape != (I, Phi):
        raise PlanError("back-face table has wrong shape")
    if inp.target_centroids.shape != (I, 3):
        raise PlanError("target centroid array has wrong shape")
    J = inp.hull.num_planes
    pos_rows = list(inp.position_rows)

    model = MiqpModel("inspection_plan")

    # --- variables, in census order ---------------------------------------
    g_vars = np.array([
        model.add_continuous(f"data_weight[{k}]", lb=-cfg.g_bound,
                             ub=cfg.g_bound)
        for k in range(Tc)])
    u_vars = np.array([
        [model.add_continuous(f"input[{t},{c}]", lb=cfg.input_lo[c],
                              ub=cfg.input_hi[c]) for c in range(m)]
        for t in range(N)])
    y_vars = np.empty((N, p), dtype=int)
    for t in range(N):
        for r in range(p):
            if r in pos_rows:
                axis = pos_rows.index(r)
                y_vars[t, r] = model.add_continuous(
                    f"output[{t},{r}]", lb=cfg.workspace_lo[axis],
                    ub=cfg.workspace_hi[axis])
            else:
                y_vars[t, r] = model.add_continuous(f"output[{t},{r}]")
    xi_vars = np.array([
        [model.add_continuous(f"insp_value[{i},{t}]", lb=0.0, ub=1.0)
         for t in range(N + 1)] for i in range(I)]).reshape(I, N + 1)
    gain_vars = np.array([
        [model.add_continuous(f"insp_gain[{i},{t}]", lb=0.0, ub=1.0)
         for t in range(N)] for i in range(I)]).reshape(I, N)
    # branch priorities steer the tree search and the dive towards the
    # decision chain: orientation first, then the inspection flags; the
    # indicator layers below them follow by propagation
    gamma_vars = np.array([
        [model.add_binary(f"inspect[{i},{t}]", priority=40)
         for t in range(N)] for i in range(I)]).reshape(I, N)
    psi_vars: dict = {}
    face_vars: dict = {}
    hit_vars: dict = {}
    for i in range(I):
        for f in range(Phi):
            if not inp.admissible[i, f]:
                continue
            psi_vars[(i, f)] = np.array([
                model.add_binary(f"in_fov[{i},{f},{t}]", priority=30)
                for t in range(N)])
            face_vars[(i, f)] = np.array([
                [model.add_binary(f"fov_face[{j},{i},{f},{t}]")
                 for t in range(N)] for j in range(5)])
            hit_vars[(i, f)] = np.array([
                model.add_binary(f"hit[{i},{f},{t}]", priority=10)
                for t in range(N)])
    omega_vars = np.array([
        [model.add_binary(f"view[{f},{t}]", priority=50) for t in range(N)]
        for f in range(Phi)]).reshape(Phi, N)
    overlap_vars = np.array([
        [model.add_binary(f"overlap[{j},{t}]", priority=20)
         for t in range(N)] for j in range(J)]).reshape(J, N)

    # --- (a) behavioural coupling -----------------------------------------
    init_u_rows = np.empty((K, m), dtype=int)
    init_y_rows = np.empty((K, p), dtype=int)
    for k in range(K):
        for c in range(m):
            row = blocks.u_past[k * m + c]
            coeffs = {int(gv): float(rv) for gv, rv in zip(g_vars, row)}
            init_u_rows[k, c] = model.add_constraint(
                coeffs, EQ, float(inp.window_u[c, k]),
                name=f"init_u[{k},{c}]")
        for r in range(p):
            row = blocks.y_past[k * p + r]
            coeffs = {int(gv): float(rv) for gv, rv in zip(g_vars, row)}
            init_y_rows[k, r] = model.add_constraint(
                coeffs, EQ, float(inp.window_y[r, k]),
                name=f"init_y[{k},{r}]")
    for t in range(N):
        for c in range(m):
            row = blocks.u_future[t * m + c]
            coeffs = {int(gv): float(rv) for gv, rv in zip(g_vars, row)}
            coeffs[int(u_vars[t, c])] = coeffs.get(int(u_vars[t, c]), 0.0) - 1.0
            model.add_constraint(coeffs, EQ, 0.0, name=f"def_u[{t},{c}]")
        for r in range(p):
            row = blocks.y_future[t * p + r]
            coeffs = {int(gv): float(rv) for gv, rv in zip(g_vars, row)}
            coeffs[int(y_vars[t, r])] = coeffs.get(int(y_vars[t, r]), 0.0) - 1.0
            model.add_constraint(coeffs, EQ, 0.0, name=f"def_y[{t},{r}]")

    # --- (b) inspection value dynamics -------------------------------------
    carry_rows = np.empty(I, dtype=int)
    gain_cap_rows = np.empty((I, N), dtype=int)
    for i in range(I):
        carry_rows[i] = model.add_constraint(
            {int(xi_vars[i, 0]): 1.0}, EQ, float(inp.carried[i]),
            name=f"carry[{i}]")
        for t in range(N):
            model.add_constraint(
                {int(xi_vars[i, t + 1]): 1.0, int(xi_vars[i, t]): -1.0,
                 int(gain_vars[i, t]): -1.0}, EQ, 0.0,
                name=f"value_step[{i},{t}]")
            gain_cap_rows[i, t] = model.add_constraint(
                {int(gain_vars[i, t]): 1.0, int(gamma_vars[i, t]): -1.0},
                LE, float(inp.memory[i]), name=f"gain_cap[{i},{t}]")
        # one planned inspection per facet; keeps the decoded plan
        # single-counting without changing the optimum (and harmlessly
        # idle once the facet is in memory)
        model.add_constraint(
            {int(gamma_vars[i, t]): 1.0 for t in range(N)}, LE, 1.0,
            name=f"single_use[{i}]")

    # --- (c) FOV containment indicators -------------------------------------
    pos_vars = y_vars[:, pos_rows]  # N x 3
    for (i, f), faces in face_vars.items():
        orient = inp.orientations[f]
        centroid = inp.target_centroids[i]
        for j in range(5):
            gam = orient.gamma[j]
            const = float(gam @ centroid - orient.delta[j])
            big_m = max(cfg.big_m_floor,
                        const + _box_max(-gam, cfg.workspace_lo,
                                         cfg.workspace_hi) + 1.0)
            for t in range(N):
                coeffs = {int(pos_vars[t, a]): float(-gam[a])
                          for a in range(3)}
                coeffs[int(faces[j, t])] = big_m
                model.add_constraint(coeffs, LE, big_m - const,
                                     name=f"face[{j},{i},{f},{t}]")
        psi = psi_vars[(i, f)]
        for t in range(N):
            coeffs = {int(faces[j, t]): -1.0 for j in range(5)}
            coeffs[int(psi[t])] = 5.0
            model.add_constraint(coeffs, LE, 0.0, name=f"contain[{i},{f},{t}]")

    # --- (d) orientation gating ---------------------------------------------
    for (i, f), hits in hit_vars.items():
        psi = psi_vars[(i, f)]
        for t in range(N):
            model.add_and(int(hits[t]), [int(psi[t]), int(omega_vars[f, t])])
    for i in range(I):
        for t in range(N):
            coeffs = {int(gamma_vars[i, t]): 1.0}
            for f in range(Phi):
                if (i, f) in hit_vars:
                    coeffs[int(hit_vars[(i, f)][t])] = -1.0
            model.add_constraint(coeffs, LE, 0.0, name=f"gate[{i},{t}]")
    for t in range(N):
        model.add_constraint({int(omega_vars[f, t]): 1.0 for f in range(Phi)},
                             EQ, 1.0, name=f"one_view[{t}]")

    # --- (e) collision avoidance --------------------------------------------
    for j in range(J):
        alpha = inp.hull.normals[j]
        beta = float(inp.hull.offsets[j])
        big_m = max(cfg.big_m_floor,
                    beta + cfg.margin
                    - (-_box_max(-alpha, cfg.workspace_lo, cfg.workspace_hi))
                    + 1.0)
        for t in range(N):
            coeffs = {int(pos_vars[t, a]): float(alpha[a]) for a in range(3)}
            coeffs[int(overlap_vars[j, t])] = big_m
            model.add_constraint(coeffs, GE, beta + cfg.margin,
                                 name=f"clear[{j},{t}]")
    for t in range(N):
        model.add_constraint({int(overlap_vars[j, t]): 1.0 for j in range(J)},
                             LE, float(J - 1), name=f"outside[{t}]")

    # --- (f) objective --------------------------------------------------------
    w1 = cfg.effort_weight
    for t in range(1, N):
        for c in range(m):
            a, b = int(u_vars[t, c]), int(u_vars[t - 1, c])
            model.add_quadratic(a, a, 2.0 * w1)
            model.add_quadratic(b, b, 2.0 * w1)
            model.add_quadratic(a, b, -2.0 * w1)
    for i in range(I):
        model.add_linear(int(xi_vars[i, N]),
                         -cfg.reward_weight * float(inp.targets.rewards[i]))

    return CompiledPlan(
        model=model, cfg=cfg, inp=inp, g_vars=g_vars, u_vars=u_vars,
        y_vars=y_vars, xi_vars=xi_vars, gain_vars=gain_vars,
        gamma_vars=gamma_vars, psi_vars=psi_vars, face_vars=face_vars,
        hit_vars=hit_vars, omega_vars=omega_vars,
        overlap_vars=overlap_vars, init_u_rows=init_u_rows,
        init_y_rows=init_y_rows, carry_rows=carry_rows,
        gain_cap_rows=gain_cap_rows)


def decode_plan(compiled: CompiledPlan, solution: Solution) -> PlanSolution:
    """Read a solver point back into plan quantities, verifying the
    structural plan invariants."""
    if solution.status == Status.INFEASIBLE or solution.values is None:
        raise PlanError(f"no plan to decode: solver status "
                        f"{solution.status.value}")
    cfg, inp = compiled.cfg, compiled.inp
    x = solution.values
    itol = cfg.solver.integrality_tol

    bins = compiled.model.binary_indices
    if bins.size and np.max(np.abs(x[bins] - np.round(x[bins]))) > itol:
        raise PlanError("integrality violation in solver point")

    N = cfg.horizon
    I = inp.targets.count
    u = x[compiled.u_vars].T.copy()              # m x N
    y = x[compiled.y_vars].T.copy()              # p x N
    positions = y[list(inp.position_rows), :]
    gamma = np.round(x[compiled.gamma_vars]).astype(int) if I else \
        np.zeros((0, N), dtype=int)
    omega_raw = np.round(x[compiled.omega_vars]).astype(int)
    if np.any(omega_raw.sum(axis=0) != 1):
        raise PlanError("active-orientation one-hot violated")
    omega = np.argmax(omega_raw, axis=0)
    xi_final = x[compiled.xi_vars[:, N]] if I else np.zeros(0)
    xi_next = x[compiled.xi_vars[:, 1]] if I else np.zeros(0)

    for i in range(I):
        if inp.memory[i] < 0.5 and gamma[i].sum() > 1:
            raise PlanError(f"facet {i} inspected more than once in plan")
        for t in range(N):
            if gamma[i, t] == 1:
                f = int(omega[t])
                if not inp.admissible[i, f]:
                    raise PlanError(
                        f"facet {i} inspected via back-facing view {f}")
                orient = inp.orientations[f]
                if not point_in_fov(orient.gamma, orient.delta,
                                    positions[:, t],
                                    inp.target_centroids[i], tol=1e-5):
                    raise PlanError(
                        f"facet {i} inspected outside the FOV at step {t}")

    return PlanSolution(
        inputs=u, outputs=y, positions=positions, gamma=gamma, omega=omega,
        xi_final=xi_final, xi_next=xi_next,
        objective=float(solution.objective), status=solution.status,
        solver=solution)
