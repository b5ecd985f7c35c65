"""Discrete-time LTI plant: generic state-space container plus the
hover-linearised quadrotor instance used throughout the package.

The quadrotor state is ordered as position/velocity pairs followed by
attitude/rate pairs::

    x = [x1, x1', x2, x2', x3, x3', roll, roll', pitch, pitch', yaw, yaw']

with full state measurement (C = I, D = 0), so the Cartesian position
lives at output indices 0, 2, 4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QuadrotorParams:
    """Physical parameters of the hover-linearised quadrotor.

    Defaults follow the reference vehicle: 0.7 s sampling, 1.2 kg mass,
    0.21 m arm, 0.004 N s^2/rad inertia on all three axes, lift bounded
    to [-3, 3] N and body torques to [-2, 2] N m (deviations from hover
    trim).
    """

    ts: float = 0.7
    gravity: float = 9.81
    mass: float = 1.2
    arm_length: float = 0.21
    inertia_x: float = 0.004
    inertia_y: float = 0.004
    inertia_z: float = 0.004
    lift_bounds: tuple[float, float] = (-3.0, 3.0)
    torque_bounds: tuple[float, float] = (-2.0, 2.0)

    def __post_init__(self) -> None:
        for name in ("ts", "gravity", "mass", "arm_length",
                     "inertia_x", "inertia_y", "inertia_z"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("lift_bounds", "torque_bounds"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must satisfy lower < upper")

    def input_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-channel (lower, upper) actuator bounds, shape (4,) each."""
        lo = np.array([self.lift_bounds[0]] + [self.torque_bounds[0]] * 3)
        hi = np.array([self.lift_bounds[1]] + [self.torque_bounds[1]] * 3)
        return lo, hi


@dataclass(frozen=True)
class LtiSystem:
    """State-space quadruple x+ = Ax + Bu, y = Cx + Du.

    ``position_rows`` names the three output indices holding the
    Cartesian position (the row-selection map used by the camera and
    collision geometry).
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    position_rows: tuple[int, int, int]

    def __post_init__(self) -> None:
        n, m, p = self.n, self.m, self.p
        if self.A.shape != (n, n) or self.B.shape != (n, m):
            raise ValueError("inconsistent A/B shapes")
        if self.C.shape != (p, n) or self.D.shape != (p, m):
            raise ValueError("inconsistent C/D shapes")
        rows = self.position_rows
        if len(set(rows)) != 3 or not all(0 <= r < p for r in rows):
            raise ValueError("position_rows must be 3 distinct output indices")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def position_of(self, y: np.ndarray) -> np.ndarray:
        """Extract the Cartesian position from an output vector."""
        return np.asarray(y)[list(self.position_rows)]


@dataclass
class SimTrace:
    """Aligned input/state/output history; column t is time-step t."""

    inputs: np.ndarray   # m x T
    states: np.ndarray   # n x T
    outputs: np.ndarray  # p x T

    def __post_init__(self) -> None:
        if not (self.inputs.shape[1] == self.states.shape[1]
                == self.outputs.shape[1]):
            raise ValueError("trace arrays must share their length")

    @property
    def length(self) -> int:
        return self.inputs.shape[1]


def build_quadrotor(params: QuadrotorParams) -> LtiSystem:
    """Assemble the hover-linearised quadrotor state-space model.

    A is 12x12 with exactly 14 non-zero entries (integrator chains plus
    the gravity tilt couplings), B is 12x4 with one non-zero per input
    channel, C = I and D = 0.
    """
    ts = params.ts
    A = np.zeros((12, 12))
    # 1-based (row, col) -> value, as in the linearised model listing.
    entries = {
        (1, 2): ts, (2, 2): 1.0, (2, 9): params.gravity * ts,
        (3, 4): ts, (4, 4): 1.0, (4, 7): -params.gravity * ts,
        (5, 6): ts, (6, 6): 1.0,
        (7, 8): ts, (8, 8): 1.0,
        (9, 10): ts, (10, 10): 1.0,
        (11, 12): ts, (12, 12): 1.0,
    }
    for (i, j), val in entries.items():
        A[i - 1, j - 1] = val

    B = np.zeros((12, 4))
    B[5, 0] = ts / params.mass
    B[7, 1] = params.arm_length * ts / params.inertia_x
    B[9, 2] = params.arm_length * ts / params.inertia_y
    B[11, 3] = ts / params.inertia_z

    return LtiSystem(A=A, B=B, C=np.eye(12), D=np.zeros((12, 4)),
                     position_rows=(0, 2, 4))


def step(sys: LtiSystem, x: np.ndarray, u: np.ndarray
         ) -> tuple[np.ndarray, np.ndarray]:
    """One exact step of the linear map: returns (x_next, y)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (sys.n,) or u.shape != (sys.m,):
        raise ValueError(f"expected x of shape ({sys.n},), u of shape ({sys.m},)")
    y = sys.C @ x + sys.D @ u
    x_next = sys.A @ x + sys.B @ u
    return x_next, y


def simulate(sys: LtiSystem, x0: np.ndarray, u_seq: np.ndarray) -> SimTrace:
    """Roll the plant forward under an input sequence.

    ``u_seq`` is m x T (or length-T list of m-vectors); the trace holds
    the T visited (x, y) pairs, i.e. the state *before* each input is
    applied.
    """
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    if u_seq.shape[0] != sys.m:
        u_seq = u_seq.T
    if u_seq.shape[0] != sys.m or u_seq.shape[1] == 0:
        raise ValueError("u_seq must be a non-empty m x T array")
    T = u_seq.shape[1]
    states = np.zeros((sys.n, T))
    outputs = np.zeros((sys.p, T))
    x = np.asarray(x0, dtype=float)
    for t in range(T):
        states[:, t] = x
        x, y = step(sys, x, u_seq[:, t])
        outputs[:, t] = y
    return SimTrace(inputs=u_seq.copy(), states=states, outputs=outputs)
