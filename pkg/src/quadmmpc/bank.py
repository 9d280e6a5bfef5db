"""Operating-point grid, attitude linearization, and the model bank.

The attitude subsystem (Euler angles + body rates, torque input) is
linearized about zero-rate trim points spread over the roll/pitch
envelope.  Pairwise gap metrics between the continuous linearizations
drive a greedy threshold reduction; the surviving representatives are
discretized at the control rate and packaged with the full-grid
assignment map so the runtime can select the representative of the
nearest operating point.

Yaw never enters a linearization (the Jacobian column is identically
zero), so operating points carry roll and pitch only.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import gap as gapmod
from .dynamics import VehicleParams, euler_kinematics_matrix, wrap_angle
from .errors import GimbalLockError
from .linsys import StateSpace, c2d
from ._purepy import GIMBAL_EPS

__all__ = [
    "OperatingPoint",
    "LinearModel",
    "ModelBank",
    "generate_grid",
    "linearize_attitude",
    "attitude_jacobian",
    "build_bank",
    "select_model",
    "save_bank",
    "load_bank",
]

BANK_FORMAT = "quadmmpc-bank"
BANK_VERSION = 1


@dataclass(frozen=True)
class OperatingPoint:
    """Zero-rate trim condition; roll in (-pi, pi], pitch inside the guard."""

    phi: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "phi", float(wrap_angle(self.phi)))
        object.__setattr__(self, "theta", float(self.theta))
        if abs(self.theta) >= np.pi / 2 - GIMBAL_EPS:
            raise GimbalLockError("operating point pitch inside gimbal guard")


@dataclass(frozen=True)
class LinearModel:
    """One linearization: states (d_eta, d_omega), inputs d_tau."""

    op: OperatingPoint
    A: np.ndarray
    B: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.shape != (6, 6) or B.shape != (6, 3):
            raise ValueError("attitude model must be 6x6 / 6x3")
        A = np.ascontiguousarray(A)
        B = np.ascontiguousarray(B)
        A.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    def to_statespace(self) -> StateSpace:
        """Full-state-output realization used for gap analysis."""
        return StateSpace(self.A, self.B, np.eye(6), np.zeros((6, 3)),
                          dt=self.dt)


def generate_grid(n_phi: int, n_theta: int,
                  theta_max: float) -> list[OperatingPoint]:
    """Uniform roll/pitch grid, pitch-major, roll-minor ordering.

    Roll takes ``n_phi`` evenly spaced interior points of (-pi, pi]
    (cell centers, endpoints excluded); pitch takes ``n_theta`` evenly
    spaced points of [-theta_max, theta_max] inclusive (the midpoint
    when ``n_theta == 1``).
    """
    if n_phi < 1 or n_theta < 1:
        raise ValueError("grid dimensions must be at least 1")
    if not 0 < theta_max < np.pi / 2:
        raise ValueError("theta_max must lie in (0, pi/2)")
    phis = -np.pi + (np.arange(n_phi) + 0.5) * (2.0 * np.pi / n_phi)
    thetas = (np.array([0.0]) if n_theta == 1
              else np.linspace(-theta_max, theta_max, n_theta))
    return [OperatingPoint(phi=float(p), theta=float(t))
            for t in thetas for p in phis]


def attitude_jacobian(eta, omega, params: VehicleParams):
    """Exact Jacobians of the attitude dynamics at an arbitrary state.

    Returns ``(A, B, f0)`` for the continuous-time attitude subsystem
    ``d/dt [eta; omega] = f([eta; omega], tau)`` evaluated at
    ``(eta, omega, tau=0)``: the 6x6 state Jacobian, the 6x3 input
    Jacobian, and the drift ``f0 = f(eta, omega, 0)``.
    """
    eta = np.asarray(eta, dtype=float).reshape(3)
    omega = np.asarray(omega, dtype=float).reshape(3)
    phi, th = eta[0], eta[1]
    H = euler_kinematics_matrix(eta)
    p, q, r = omega
    cphi, sphi = np.cos(phi), np.sin(phi)
    tth = np.tan(th)
    sec = 1.0 / np.cos(th)
    # d(H(eta) omega)/d(phi, theta); the yaw column is identically zero
    dHw_dphi = np.array([
        cphi * tth * q - sphi * tth * r,
        -sphi * q - cphi * r,
        (cphi * q - sphi * r) * sec,
    ])
    dHw_dth = np.array([
        (sphi * q + cphi * r) * sec ** 2,
        0.0,
        (sphi * q + cphi * r) * sec * tth,
    ])
    A11 = np.column_stack([dHw_dphi, dHw_dth, np.zeros(3)])
    J = params.J
    Jw = J @ omega
    def skew(v):
        return np.array([[0.0, -v[2], v[1]],
                         [v[2], 0.0, -v[0]],
                         [-v[1], v[0], 0.0]])
    Jinv = np.diag(1.0 / params.J_diag)
    A22 = Jinv @ (skew(Jw) - skew(omega) @ J)
    A = np.block([[A11, H], [np.zeros((3, 3)), A22]])
    B = np.vstack([np.zeros((3, 3)), Jinv])
    f0 = np.concatenate([H @ omega, Jinv @ (-np.cross(omega, Jw))])
    return A, B, f0


def linearize_attitude(op: OperatingPoint,
                       params: VehicleParams) -> LinearModel:
    """Continuous-time linearization at a zero-rate trim point.

    At zero body rates both the rate-coupling and the kinematic
    sensitivity to the angles vanish, leaving
    ``A = [[0, H(op)], [0, 0]]`` and ``B = [[0], [inv(J)]]``.
    """
    A, B, _ = attitude_jacobian([op.phi, op.theta, 0.0], np.zeros(3), params)
    # enforce the exact trim structure (the blocks are analytically zero)
    A = A.copy()
    A[:3, :3] = 0.0
    A[3:, 3:] = 0.0
    return LinearModel(op=op, A=A, B=B, dt=None)


@dataclass(frozen=True)
class ModelBank:
    """Reduced model bank plus the full-grid assignment map.

    ``models[k]`` is the (discrete-time) representative for every grid
    point ``i`` with ``assignment[i] == representative_grid_indices[k]``.
    """

    models: tuple[LinearModel, ...]
    grid: tuple[OperatingPoint, ...]
    representative_grid_indices: tuple[int, ...]
    assignment: np.ndarray            # grid index -> representative grid index
    delta_th: float
    sample_period: float
    params_hash: str
    gap_entries: np.ndarray | None = None

    def __post_init__(self):
        if len(self.models) == 0:
            raise ValueError("bank must contain at least one model")
        a = np.asarray(self.assignment, dtype=np.intp)
        if a.shape != (len(self.grid),):
            raise ValueError("assignment length must match the grid")
        rep_set = set(self.representative_grid_indices)
        if not all(int(x) in rep_set for x in a):
            raise ValueError("assignment targets must be representatives")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "_rep_position", {
            int(g): k for k, g in enumerate(self.representative_grid_indices)})

    @property
    def n_models(self) -> int:
        return len(self.models)

    @property
    def n_grid(self) -> int:
        return len(self.grid)

    def representative_for_grid_point(self, grid_index: int) -> int:
        """Position in ``models`` of the representative covering a grid point."""
        return self._rep_position[int(self.assignment[grid_index])]


def params_fingerprint(params: VehicleParams) -> str:
    jd = params.J_diag
    key = ",".join(repr(float(v)) for v in
                   (params.m, jd[0], jd[1], jd[2], params.l,
                    params.k_T, params.k_Q, params.g))
    return hashlib.sha256(key.encode()).hexdigest()[:16]


def build_bank(grid: list[OperatingPoint], params: VehicleParams,
               delta_th: float, T_s: float,
               tol: float = gapmod.DEFAULT_TOL,
               n_jobs: int | None = None) -> ModelBank:
    """Linearize, compute the gap matrix, reduce, discretize.

    Gap analysis runs on the continuous-time linearizations; the
    surviving representatives are discretized (zero-order hold) at
    ``T_s`` afterward.  Deterministic for a fixed grid.
    """
    if len(grid) == 0:
        raise ValueError("operating grid must be nonempty")
    continuous = [linearize_attitude(op, params) for op in grid]
    systems = [m.to_statespace() for m in continuous]
    gm = gapmod.gap_matrix(systems, tol=tol, n_jobs=n_jobs)
    reps, assign = gapmod.reduce_bank(gm, delta_th)
    models = []
    for gi in reps:
        m = continuous[gi]
        dss = c2d(m.to_statespace(), T_s, method="zoh")
        models.append(LinearModel(op=m.op, A=dss.A, B=dss.B, dt=T_s))
    assignment = np.array([assign[i] for i in range(len(grid))], dtype=np.intp)
    return ModelBank(models=tuple(models), grid=tuple(grid),
                     representative_grid_indices=tuple(int(i) for i in reps),
                     assignment=assignment, delta_th=float(delta_th),
                     sample_period=float(T_s),
                     params_hash=params_fingerprint(params),
                     gap_entries=gm.entries)


def select_model(bank: ModelBank, current_phi: float,
                 current_theta: float) -> int:
    """Representative (position in ``bank.models``) for the nearest grid point.

    Distance is ``wrap(d_phi)^2 + d_theta^2`` with the roll difference
    wrapped to (-pi, pi]; ties go to the lowest grid index.
    """
    phis = np.array([op.phi for op in bank.grid])
    thetas = np.array([op.theta for op in bank.grid])
    dphi = wrap_angle(current_phi - phis)
    d2 = dphi ** 2 + (current_theta - thetas) ** 2
    j = int(np.argmin(d2))
    return bank.representative_for_grid_point(j)


# ---------------------------------------------------------------------------
# Serialization (versioned, lossless round trip)
# ---------------------------------------------------------------------------

def save_bank(bank: ModelBank, path) -> None:
    doc = {
        "format": BANK_FORMAT,
        "version": BANK_VERSION,
        "params_hash": bank.params_hash,
        "delta_th": bank.delta_th,
        "sample_period": bank.sample_period,
        "grid": [[op.phi, op.theta] for op in bank.grid],
        "representatives": [
            {
                "grid_index": int(gi),
                "op": [m.op.phi, m.op.theta],
                "A": [float(v) for v in m.A.ravel(order="C")],
                "B": [float(v) for v in m.B.ravel(order="C")],
            }
            for gi, m in zip(bank.representative_grid_indices, bank.models)
        ],
        "assignment": [int(v) for v in bank.assignment],
        "gap_matrix": (None if bank.gap_entries is None
                       else [[float(v) for v in row]
                             for row in bank.gap_entries]),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_bank(path) -> ModelBank:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != BANK_FORMAT:
        raise ValueError("not a model bank file")
    if doc.get("version") != BANK_VERSION:
        raise ValueError(f"unsupported bank version {doc.get('version')!r}")
    T_s = float(doc["sample_period"])
    grid = tuple(OperatingPoint(phi=p, theta=t) for p, t in doc["grid"])
    models = []
    reps = []
    for entry in doc["representatives"]:
        op = OperatingPoint(phi=entry["op"][0], theta=entry["op"][1])
        A = np.array(entry["A"], dtype=float).reshape(6, 6)
        B = np.array(entry["B"], dtype=float).reshape(6, 3)
        models.append(LinearModel(op=op, A=A, B=B, dt=T_s))
        reps.append(int(entry["grid_index"]))
    gm = doc.get("gap_matrix")
    return ModelBank(
        models=tuple(models), grid=grid,
        representative_grid_indices=tuple(reps),
        assignment=np.array(doc["assignment"], dtype=np.intp),
        delta_th=float(doc["delta_th"]), sample_period=T_s,
        params_hash=doc["params_hash"],
        gap_entries=None if gm is None else np.array(gm, dtype=float),
    )
