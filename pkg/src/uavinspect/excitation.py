"""Persistently exciting data collection and Hankel-matrix machinery.

The behavioural route to prediction: one sufficiently rich input/output
record of the plant, arranged into block Hankel matrices, spans every
trajectory window the plant can produce.  ``membership_residual`` is the
numerical form of that statement and doubles as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .lti import LtiSystem, simulate


@dataclass
class DataSequence:
    """One recorded input/output trajectory of a plant.

    ``state_dim`` is the order n of the generating system; it is needed
    to check the minimum-length condition T >= (m+1)(L+n) - 1 when the
    record is split into past/future blocks.
    """

    u: np.ndarray  # m x T
    y: np.ndarray  # p x T
    state_dim: int
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.u.ndim != 2 or self.y.ndim != 2:
            raise ValueError("u and y must be 2-d (channels x time)")
        if self.u.shape[1] != self.y.shape[1]:
            raise ValueError("u and y must have the same length")

    @property
    def m(self) -> int:
        return self.u.shape[0]

    @property
    def p(self) -> int:
        return self.y.shape[0]

    @property
    def length(self) -> int:
        return self.u.shape[1]


@dataclass
class HankelBlocks:
    """Past/future partition of the depth-(K+N) data Hankel matrices.

    ``u_past`` holds the first K block rows of the input Hankel matrix,
    ``u_future`` the remaining N, and likewise for the output; all four
    share the column count Tc = T - (K+N) + 1.
    """

    u_past: np.ndarray    # mK x Tc
    u_future: np.ndarray  # mN x Tc
    y_past: np.ndarray    # pK x Tc
    y_future: np.ndarray  # pN x Tc
    past_len: int
    horizon: int
    m: int
    p: int

    @property
    def depth(self) -> int:
        return self.past_len + self.horizon

    @property
    def width(self) -> int:
        return self.u_past.shape[1]

    def stacked(self) -> np.ndarray:
        """Re-stack [H_L(u); H_L(y)] (inputs on top), shape (m+p)L x Tc."""
        return np.vstack([self.u_past, self.u_future,
                          self.y_past, self.y_future])


def hankel(signal: np.ndarray, depth: int) -> np.ndarray:
    """Block Hankel matrix of a d x T signal.

    Block row k (0-based) holds signal columns k .. k+T-depth, so entry
    block (k, j) is signal column k+j.  Result is d*depth x (T-depth+1).
    """
    signal = np.atleast_2d(np.asarray(signal, dtype=float))
    d, T = signal.shape
    if depth < 1 or depth > T:
        raise ValueError(f"depth must be in 1..{T}, got {depth}")
    cols = T - depth + 1
    H = np.empty((d * depth, cols))
    for k in range(depth):
        H[k * d:(k + 1) * d, :] = signal[:, k:k + cols]
    return H


def is_persistently_exciting(u: np.ndarray, order: int,
                             tol: float = 1e-8) -> bool:
    """Full-row-rank test of the depth-``order`` Hankel matrix of u.

    Rank is counted as the number of singular values above
    tol * sigma_max.  Returns False outright when m*order exceeds the
    column count (full row rank is then impossible).
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    m, T = u.shape
    if order > T or m * order > T - order + 1:
        return False
    H = hankel(u, order)
    svals = np.linalg.svd(H, compute_uv=False)
    if svals[0] == 0.0:
        return False
    return int(np.sum(svals > tol * svals[0])) == m * order


def generate_pe_input(lower: np.ndarray, upper: np.ndarray, length: int,
                      order: int, seed: int | None = None,
                      tol: float = 1e-8, max_tries: int = 20) -> np.ndarray:
    """Sample a uniform per-channel input verified to be persistently
    exciting of the requested order.

    Raises ValueError when the order is infeasible for the length (rank
    pigeonhole) or when the bounds are too degenerate to pass the rank
    check within ``max_tries`` fresh draws.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m = lower.shape[0]
    if m * order > length - order + 1:
        raise ValueError(
            f"PE of order {order} impossible: {m * order} rows exceed "
            f"{length - order + 1} Hankel columns")
    if np.any(upper <= lower):
        raise ValueError("input bounds must have positive width")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        u = rng.uniform(lower[:, None], upper[:, None], (m, length))
        if is_persistently_exciting(u, order, tol):
            return u
    raise ValueError(f"no persistently exciting draw in {max_tries} tries")


def stabilizing_gain(sys: LtiSystem, control_weight: float = 10.0
                     ) -> np.ndarray:
    """LQR state-feedback gain F with A - BF Schur stable (Q = I)."""
    Q = np.eye(sys.n)
    R = control_weight * np.eye(sys.m)
    P = scipy.linalg.solve_discrete_are(sys.A, sys.B, Q, R)
    return np.linalg.solve(R + sys.B.T @ P @ sys.B, sys.B.T @ P @ sys.A)


def collect_data(sys: LtiSystem, lower: np.ndarray, upper: np.ndarray,
                 length: int, pe_order: int, seed: int | None = None,
                 stabilize: bool = True, dither_scale: float = 0.5,
                 tol: float = 1e-8, max_tries: int = 20) -> DataSequence:
    """Run the plant from the origin under exciting inputs and record
    the trajectory, verifying persistency of excitation on the inputs
    actually applied.

    With ``stabilize`` (the default) the applied input is a uniform
    dither plus a stabilising LQR feedback, clipped to the actuator box;
    the hover-linearised quadrotor is marginally unstable, and raw
    open-loop excitation drifts to output magnitudes that poison the
    conditioning of every downstream least-squares and QP solve.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(upper <= lower):
        raise ValueError("input bounds must have positive width")
    rng = np.random.default_rng(seed)
    gain = stabilizing_gain(sys) if stabilize else None
    for _ in range(max_tries):
        if gain is None:
            u_applied = rng.uniform(lower[:, None], upper[:, None],
                                    (sys.m, length))
            trace = simulate(sys, np.zeros(sys.n), u_applied)
        else:
            mid = 0.5 * (lower + upper)
            half = 0.5 * dither_scale * (upper - lower)
            dither = rng.uniform((mid - half)[:, None], (mid + half)[:, None],
                                 (sys.m, length))
            u_applied = np.zeros((sys.m, length))
            x = np.zeros(sys.n)
            for t in range(length):
                u = np.clip(dither[:, t] - gain @ x, lower, upper)
                u_applied[:, t] = u
                x = sys.A @ x + sys.B @ u
            trace = simulate(sys, np.zeros(sys.n), u_applied)
        if is_persistently_exciting(u_applied, pe_order, tol):
            return DataSequence(u=trace.inputs, y=trace.outputs,
                                state_dim=sys.n, seed=seed)
    raise ValueError(f"persistency of excitation not reached in "
                     f"{max_tries} collection attempts")


def split_blocks(data: DataSequence, past_len: int, horizon: int
                 ) -> HankelBlocks:
    """Partition the depth-L Hankel matrices into past/future blocks,
    L = past_len + horizon.

    Requires past_len >= 1 and the minimum record length
    T >= (m+1)(L+n) - 1 for the generating system's order n.
    """
    if past_len < 1:
        raise ValueError("past window must be at least 1 step")
    if horizon < 1:
        raise ValueError("horizon must be at least 1 step")
    L = past_len + horizon
    needed = (data.m + 1) * (L + data.state_dim) - 1
    if data.length < needed:
        raise ValueError(
            f"record of length {data.length} too short: need at least "
            f"{needed} samples for depth {L} and order {data.state_dim}")
    Hu = hankel(data.u, L)
    Hy = hankel(data.y, L)
    mk = data.m * past_len
    pk = data.p * past_len
    return HankelBlocks(
        u_past=Hu[:mk], u_future=Hu[mk:],
        y_past=Hy[:pk], y_future=Hy[pk:],
        past_len=past_len, horizon=horizon, m=data.m, p=data.p)


def membership_residual(blocks: HankelBlocks, u_win: np.ndarray,
                        y_win: np.ndarray) -> tuple[float, np.ndarray]:
    """Distance of a length-L window from the span of the data Hankel
    columns: the relative residual of the least-squares solve
    [H_L(u); H_L(y)] g = [u; y], with the minimum-norm g returned.

    A residual near zero certifies (u_win, y_win) as a plant trajectory;
    anything structurally off the behaviour shows up orders of magnitude
    higher.
    """
    L = blocks.depth
    u_win = np.asarray(u_win, dtype=float).reshape(blocks.m, L, order="F")
    y_win = np.asarray(y_win, dtype=float).reshape(blocks.p, L, order="F")
    rhs = np.concatenate([u_win.T.reshape(-1), y_win.T.reshape(-1)])
    H = blocks.stacked()
    g, *_ = np.linalg.lstsq(H, rhs, rcond=None)
    defect = float(np.linalg.norm(H @ g - rhs))
    scale = float(np.linalg.norm(rhs))
    residual = 0.0 if scale == 0.0 and defect == 0.0 else defect / max(scale, 1e-300)
    return residual, g
