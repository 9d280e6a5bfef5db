"""Continuous-time nonlinear quadrotor model, rotor mixing, integration.

Conventions: inertial frame with z up, body frame with z along the
thrust axis; Euler angles roll/pitch/yaw applied in the yaw-pitch-roll
sequence; gravity enters the translational dynamics as
``acc = -g_vec + R @ f / m`` with ``g_vec = [0, 0, g]``, so positive
thrust opposes gravity.  Rotors 1 and 3 spin positive, 2 and 4 negative.

The 12-state layout used throughout the simulator is
``[x, y, z, u, v, w, phi, theta, psi, p, q, r]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from ._purepy import GIMBAL_EPS, rigid_body_derivative
from .errors import GimbalLockError

__all__ = [
    "VehicleParams",
    "VehicleState",
    "WrenchCmd",
    "RotorSpeeds",
    "rotation_matrix",
    "euler_kinematics_matrix",
    "mix_rotors_to_wrench",
    "wrench_to_rotors",
    "state_derivative",
    "integrate_rk4",
    "wrap_angle",
]


def wrap_angle(a):
    """Wrap an angle (or array of angles) to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), 2.0 * np.pi)


@dataclass(frozen=True)
class VehicleParams:
    """Physical quadrotor parameters (defaults: the 650 g test vehicle)."""

    m: float = 0.65                       # kg
    J: np.ndarray = field(default_factory=lambda: np.diag([0.021, 0.023, 0.032]))
    l: float = 0.225                      # arm length, m
    k_T: float = 1.22e-5                  # thrust coefficient, N s^2
    k_Q: float = 6.89e-5                  # torque coefficient, N m s^2
    g: float = 9.81                       # m/s^2

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.shape == (3,):
            J = np.diag(J)
        if J.shape != (3, 3) or not np.allclose(J, np.diag(np.diag(J))):
            raise ValueError("inertia must be a 3x3 diagonal matrix")
        if np.any(np.diag(J) <= 0):
            raise ValueError("inertia diagonal must be positive")
        for name in ("m", "l", "k_T", "k_Q", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        J = np.ascontiguousarray(J)
        J.flags.writeable = False
        object.__setattr__(self, "J", J)

    @property
    def J_diag(self) -> np.ndarray:
        return np.diag(self.J)

    @property
    def hover_thrust(self) -> float:
        return self.m * self.g


@dataclass(frozen=True)
class VehicleState:
    """Rigid-body state: position, velocity, Euler angles, body rates.

    Roll and yaw live in (-pi, pi], pitch in [-pi/2, pi/2]; construction
    wraps the former and flags pitch inside the gimbal guard.
    """

    xi: np.ndarray
    v: np.ndarray
    eta: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        for name in ("xi", "v", "eta", "omega"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(3).copy()
            object.__setattr__(self, name, arr)
        eta = self.eta
        eta[0] = wrap_angle(eta[0])
        eta[2] = wrap_angle(eta[2])
        if abs(eta[1]) > np.pi / 2:
            raise ValueError("pitch outside [-pi/2, pi/2]; Euler chart lost")
        for name in ("xi", "v", "eta", "omega"):
            getattr(self, name).flags.writeable = False

    @classmethod
    def zero(cls) -> "VehicleState":
        z = np.zeros(3)
        return cls(z, z, z, z)

    @classmethod
    def from_array(cls, x) -> "VehicleState":
        x = np.asarray(x, dtype=float)
        return cls(x[0:3], x[3:6], x[6:9], x[9:12])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.xi, self.v, self.eta, self.omega])

    @property
    def near_gimbal(self) -> bool:
        return abs(self.eta[1]) >= np.pi / 2 - GIMBAL_EPS


@dataclass(frozen=True)
class WrenchCmd:
    """Total thrust along body z and body torques."""

    T: float
    tau: np.ndarray

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("thrust must be nonnegative")
        tau = np.asarray(self.tau, dtype=float).reshape(3).copy()
        tau.flags.writeable = False
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "T", float(self.T))


@dataclass(frozen=True)
class RotorSpeeds:
    """Signed rotor rates; 1 and 3 positive, 2 and 4 negative."""

    omega_rotors: np.ndarray
    saturated: bool = False

    def __post_init__(self):
        w = np.asarray(self.omega_rotors, dtype=float).reshape(4).copy()
        if w[0] < 0 or w[2] < 0 or w[1] > 0 or w[3] > 0:
            raise ValueError("rotor sign pattern must be (+, -, +, -)")
        w.flags.writeable = False
        object.__setattr__(self, "omega_rotors", w)


def rotation_matrix(eta) -> np.ndarray:
    """Body-to-inertial rotation for Euler angles (roll, pitch, yaw)."""
    phi, th, psi = np.asarray(eta, dtype=float).reshape(3)
    cphi, sphi = np.cos(phi), np.sin(phi)
    cth, sth = np.cos(th), np.sin(th)
    cpsi, spsi = np.cos(psi), np.sin(psi)
    return np.array([
        [cth * cpsi, sphi * sth * cpsi - cphi * spsi,
         cphi * sth * cpsi + sphi * spsi],
        [cth * spsi, sphi * sth * spsi + cphi * cpsi,
         cphi * sth * spsi - sphi * cpsi],
        [-sth, sphi * cth, cphi * cth],
    ])


def euler_kinematics_matrix(eta) -> np.ndarray:
    """Map from body rates to Euler-angle rates; singular at |pitch| = pi/2."""
    phi, th = np.asarray(eta, dtype=float).reshape(3)[:2]
    if abs(th) >= np.pi / 2 - GIMBAL_EPS:
        raise GimbalLockError(
            f"pitch {th:.4f} rad within {GIMBAL_EPS} of the kinematic "
            "singularity")
    cphi, sphi = np.cos(phi), np.sin(phi)
    tth = np.tan(th)
    sec = 1.0 / np.cos(th)
    return np.array([
        [1.0, sphi * tth, cphi * tth],
        [0.0, cphi, -sphi],
        [0.0, sphi * sec, cphi * sec],
    ])


def mix_rotors_to_wrench(rotors: RotorSpeeds, params: VehicleParams) -> WrenchCmd:
    """Total thrust and body torques generated by the four rotors."""
    s = rotors.omega_rotors ** 2
    kT, kQ, l = params.k_T, params.k_Q, params.l
    T = kT * float(np.sum(s))
    tau = np.array([
        l * kT * (s[1] - s[3]),
        l * kT * (s[2] - s[0]),
        kQ * (-s[0] + s[1] - s[2] + s[3]),
    ])
    return WrenchCmd(T=T, tau=tau)


def wrench_to_rotors(cmd: WrenchCmd, params: VehicleParams) -> RotorSpeeds:
    """Invert the rotor mixing; infeasible squared speeds clamp to zero.

    The clamp is flagged through ``RotorSpeeds.saturated`` rather than
    raised, so flight code can log and continue.
    """
    kT, kQ, l = params.k_T, params.k_Q, params.l
    t4 = cmd.T / (4.0 * kT)
    tx = cmd.tau[0] / (2.0 * l * kT)
    ty = cmd.tau[1] / (2.0 * l * kT)
    tz = cmd.tau[2] / (4.0 * kQ)
    s = np.array([t4 - ty - tz,
                  t4 + tx + tz,
                  t4 + ty - tz,
                  t4 - tx + tz])
    saturated = bool(np.any(s < 0))
    s = np.maximum(s, 0.0)
    mag = np.sqrt(s)
    return RotorSpeeds(omega_rotors=mag * np.array([1.0, -1.0, 1.0, -1.0]),
                       saturated=saturated)


def state_derivative(state: VehicleState, cmd: WrenchCmd,
                     params: VehicleParams) -> np.ndarray:
    """Right-hand side of the rigid-body equations as a flat 12-vector."""
    jx, jy, jz = params.J_diag
    try:
        return rigid_body_derivative(state.as_array(), cmd.T, cmd.tau,
                                     params.m, jx, jy, jz, params.g)
    except ArithmeticError as exc:
        raise GimbalLockError(str(exc)) from exc


def integrate_rk4(state: VehicleState, cmd: WrenchCmd,
                  params: VehicleParams, dt: float) -> VehicleState:
    """One RK4 step with the wrench held; wraps roll/yaw afterward."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    jx, jy, jz = params.J_diag
    try:
        x = kernels.rk4_step(state.as_array(), cmd.T, cmd.tau,
                             params.m, jx, jy, jz, params.g, dt)
    except ArithmeticError as exc:
        raise GimbalLockError(str(exc)) from exc
    return VehicleState.from_array(x)
