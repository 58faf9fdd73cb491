"""Rigid-body quadrotor plant and its casting into the second-order
controlled-system class, plus rotor mixing, thrust/attitude command
extraction, payload composition, and the wind-gust disturbance model.

Frames and conventions: world frame z-up, body frame at the geometric
center.  Euler angles eta = [roll, pitch, yaw] with the rotation
R = Rz(yaw) Rx(roll) Ry(pitch); this is the convention whose thrust
column matches the world-force map used by the position loop, and whose
rate transformation R_r (body rates = R_r eta_dot) is singular at roll
= +-pi/2.  The plant model is

    m xi_ddot           = -m G + R F_B + delta_xi
    J R_r eta_ddot      = tau_B + r x F_B + delta_eta

with F_B = [0, 0, F_t] the total rotor force in the body frame, r the
center-of-mass offset, and delta_* lumped disturbances.  Gyroscopic and
rate-transport terms are not modeled; they belong to delta_eta.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

GRAVITY = 9.81  # m/s^2

# Attitude guard: the rate transformation degenerates at roll = +-pi/2 and
# the thrust map at pitch = +-pi/2; keep a margin away from both.
SINGULARITY_MARGIN = 0.1  # rad
_ATTITUDE_LIMIT = np.pi / 2.0 - SINGULARITY_MARGIN


class AttitudeSingularity(RuntimeError):
    """Roll or pitch entered the transformation-singularity margin."""


@dataclass(frozen=True)
class QuadrotorParams:
    """Physical constants.  Defaults model the simulated platform:
    m = 1.76 kg, Jxx = Jyy = 0.03, Jzz = 0.04 kg m^2, L = 0.2 m,
    Kt = 13 N and KQ = 0.4 N m per unit squared normalized rotor speed.
    """

    m: float = 1.76
    J: np.ndarray = field(default_factory=lambda: np.diag([0.03, 0.03, 0.04]))
    L: float = 0.2
    Kt: float = 13.0
    KQ: float = 0.4
    r: np.ndarray = field(default_factory=lambda: np.zeros(3))
    g_const: float = GRAVITY

    def __post_init__(self):
        object.__setattr__(self, "J", np.asarray(self.J, dtype=float))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        if self.m <= 0.0 or self.L <= 0.0 or self.Kt <= 0.0 or self.KQ <= 0.0:
            raise ValueError("m, L, Kt, KQ must all be positive")
        if self.J.shape != (3, 3) or np.any(np.linalg.eigvalsh(self.J) <= 0.0):
            raise ValueError("J must be a 3x3 positive-definite tensor")
        object.__setattr__(self, "_J_inv", np.linalg.inv(self.J))

    @property
    def J_inv(self):
        return self._J_inv


@dataclass
class QuadState:
    """12-dim rigid-body state plus normalized rotor speeds."""

    xi: np.ndarray  # position, world frame, m
    eta: np.ndarray  # roll, pitch, yaw, rad
    xi_dot: np.ndarray  # m/s
    eta_dot: np.ndarray  # rad/s
    omega_rotors: np.ndarray  # normalized rotor speeds, >= 0

    @classmethod
    def at_rest(cls, omega_rotors=None):
        w = np.zeros(4) if omega_rotors is None else np.asarray(omega_rotors, dtype=float)
        return cls(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), w)

    def vector12(self):
        return np.concatenate([self.xi, self.eta, self.xi_dot, self.eta_dot])


@dataclass(frozen=True)
class Payload:
    """Point-mass payload rigidly attached in the body frame."""

    mass: float = 0.0
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attached: bool = False
    attach_time: float = 0.0
    detach_time: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.mass < 0.0:
            raise ValueError("payload mass must be non-negative")

    def is_attached(self, t):
        if not self.attached or self.mass == 0.0:
            return False
        if t < self.attach_time:
            return False
        return self.detach_time is None or t < self.detach_time


@dataclass(frozen=True)
class WindGust:
    """World-frame disturbance force switched on at `onset`."""

    onset: float
    force: np.ndarray
    profile: str = "step"  # "step" | "ramped"
    rise_time: float = 0.5
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "force", np.asarray(self.force, dtype=float))
        object.__setattr__(self, "torque", np.asarray(self.torque, dtype=float))
        if self.onset < 0.0:
            raise ValueError("gust onset must be non-negative")
        if self.profile not in ("step", "ramped"):
            raise ValueError(f"unknown gust profile {self.profile!r}")


def gust_scale(gust, t):
    """Activation factor in [0, 1] of a gust at time t."""
    if gust is None or t < gust.onset:
        return 0.0
    if gust.profile == "ramped" and gust.rise_time > 0.0:
        return min(1.0, (t - gust.onset) / gust.rise_time)
    return 1.0


def gust_force(gust, t):
    if gust is None:
        return np.zeros(3)
    return gust.force * gust_scale(gust, t)


def rotation_matrix(eta):
    """Body-to-world rotation Rz(yaw) Rx(roll) Ry(pitch)."""
    s1, s2, s3 = np.sin(eta)
    c1, c2, c3 = np.cos(eta)
    return np.array(
        [
            [c3 * c2 - s3 * s1 * s2, -s3 * c1, c3 * s2 + s3 * s1 * c2],
            [s3 * c2 + c3 * s1 * s2, c3 * c1, s3 * s2 - c3 * s1 * c2],
            [-c1 * s2, s1, c1 * c2],
        ]
    )


def euler_rate_matrix(eta):
    """R_r with body rates = R_r eta_dot; det R_r = cos(roll)."""
    s1, s2 = np.sin(eta[0]), np.sin(eta[1])
    c1, c2 = np.cos(eta[0]), np.cos(eta[1])
    return np.array([[c2, 0.0, -s2 * c1], [0.0, 1.0, s1], [s2, 0.0, c2 * c1]])


def solve_euler_rate(eta, rhs):
    """Solve R_r x = rhs in closed form (rank-2 block plus middle row)."""
    if abs(eta[0]) >= _ATTITUDE_LIMIT:
        raise AttitudeSingularity(f"roll {eta[0]:.3f} rad inside singularity margin")
    s1, s2 = np.sin(eta[0]), np.sin(eta[1])
    c1, c2 = np.cos(eta[0]), np.cos(eta[1])
    x1 = c2 * rhs[0] + s2 * rhs[2]
    x3 = (-s2 * rhs[0] + c2 * rhs[2]) / c1
    x2 = rhs[1] - s1 * x3
    return np.array([x1, x2, x3])


def world_force(eta, F_t):
    """Thrust of magnitude F_t along the body z axis, in world coordinates."""
    s1, s2, s3 = np.sin(eta)
    c1, c2, c3 = np.cos(eta)
    return F_t * np.array(
        [s1 * c2 * s3 + s2 * c3, s2 * s3 - s1 * c2 * c3, c1 * c2]
    )


def thrust_and_attitude_from_u(u, eta3):
    """Invert the world-force map: total-thrust command and the roll/pitch
    commands realizing the requested world force at the current yaw.

    Requires u[2] > 0 (thrust pointing up; inverted flight is out of
    scope).  An arcsin argument beyond +-1 (numerically inconsistent u)
    is clamped to +-(1 - 1e-9) with a warning.
    """
    u = np.asarray(u, dtype=float)
    if u[2] <= 0.0:
        raise ValueError(f"u3 must be positive, got {u[2]}")
    F_tc = float(np.linalg.norm(u))
    s3, c3 = np.sin(eta3), np.cos(eta3)
    eta1d = np.arctan((u[0] * s3 - u[1] * c3) / u[2])
    arg = (u[0] * c3 + u[1] * s3) / F_tc
    if abs(arg) > 1.0:
        warnings.warn("attitude extraction: arcsin argument clamped", RuntimeWarning)
        arg = np.clip(arg, -(1.0 - 1e-9), 1.0 - 1e-9)
    eta2d = np.arcsin(arg)
    return F_tc, float(eta1d), float(eta2d)


def regressor_phi2(F_t, eta, J_nominal=(0.03, 0.03)):
    """Regressor of the rotational dynamics in the unknown center-of-mass
    offsets [r_x, r_y], scaled by the nominal inertias.
    """
    if abs(eta[0]) >= _ATTITUDE_LIMIT:
        raise AttitudeSingularity(f"roll {eta[0]:.3f} rad inside singularity margin")
    Jxx0, Jyy0 = J_nominal
    s1, s2 = np.sin(eta[0]), np.sin(eta[1])
    c1, c2 = np.cos(eta[0]), np.cos(eta[1])
    t1 = s1 / c1
    return np.array(
        [
            [0.0, -F_t * c2 / Jxx0],
            [F_t / Jyy0, -F_t * t1 * s2 / Jxx0],
            [0.0, F_t * s2 / (c1 * Jxx0)],
        ]
    )


def mixing_matrix(params):
    """Rows map squared rotor speeds to [F_t, T1, T2, T3]."""
    Kt, KQ, L = params.Kt, params.KQ, params.L
    return np.array(
        [
            [Kt, Kt, Kt, Kt],
            [0.0, 0.0, Kt * L, -Kt * L],
            [Kt * L, -Kt * L, 0.0, 0.0],
            [KQ, KQ, -KQ, -KQ],
        ]
    )


def rotor_speeds_sq_from_wrench(F_t, tau, params):
    """Solve the mixing system for squared rotor speeds.

    Combinations demanding negative omega^2 are saturated at zero and
    flagged; the forward map then no longer reproduces the request.
    Returns (omega_sq, saturated).
    """
    w = np.linalg.solve(mixing_matrix(params), np.array([F_t, tau[0], tau[1], tau[2]]))
    saturated = bool(np.any(w < 0.0))
    if saturated:
        w = np.maximum(w, 0.0)
    return w, saturated


def wrench_from_rotor_speeds_sq(omega_sq, params):
    """Forward mixing map; returns (F_t, tau)."""
    out = mixing_matrix(params) @ np.asarray(omega_sq, dtype=float)
    return float(out[0]), out[1:]


def motor_lag(omega_cmd, omega_actual, tau_m, dt):
    """First-order lag of the rotor command channel (exact discrete step).

    tau_m = 0 passes the command through.
    """
    if tau_m < 0.0:
        raise ValueError("tau_m must be non-negative")
    if tau_m == 0.0:
        return np.asarray(omega_cmd, dtype=float).copy()
    a = 1.0 - np.exp(-dt / tau_m)
    return omega_actual + a * (np.asarray(omega_cmd, dtype=float) - omega_actual)


def composite_inertia(params, payload):
    """Parameters of the vehicle-plus-payload composite body.

    Mass adds, the center of mass shifts to the mass-weighted mean, and
    the inertia gains the point-mass parallel-axis contribution of the
    payload about the body origin.
    """
    if payload.mass == 0.0:
        return params
    m_total = params.m + payload.mass
    r = (params.m * params.r + payload.mass * payload.position) / m_total
    p = payload.position
    J = params.J + payload.mass * (float(p @ p) * np.eye(3) - np.outer(p, p))
    return QuadrotorParams(
        m=m_total, J=J, L=params.L, Kt=params.Kt, KQ=params.KQ, r=r,
        g_const=params.g_const,
    )


def _deriv12(x, params, F_B, tau_B, delta_xi, delta_eta):
    """Time derivative of the packed state [xi, eta, xi_dot, eta_dot]."""
    eta = x[3:6]
    if abs(eta[0]) >= _ATTITUDE_LIMIT or abs(eta[1]) >= _ATTITUDE_LIMIT:
        raise AttitudeSingularity(
            f"attitude (roll={eta[0]:.3f}, pitch={eta[1]:.3f}) inside singularity margin"
        )
    R = rotation_matrix(eta)
    xi_ddot = (R @ F_B + delta_xi) / params.m
    xi_ddot = xi_ddot + np.array([0.0, 0.0, -params.g_const])
    r, F = params.r, F_B
    com_moment = np.array(
        [
            r[1] * F[2] - r[2] * F[1],
            r[2] * F[0] - r[0] * F[2],
            r[0] * F[1] - r[1] * F[0],
        ]
    )
    moment = tau_B + com_moment + delta_eta
    eta_ddot = solve_euler_rate(eta, params.J_inv @ moment)
    out = np.empty(12)
    out[0:3] = x[6:9]
    out[3:6] = x[9:12]
    out[6:9] = xi_ddot
    out[9:12] = eta_ddot
    return out


def dynamics(state, params, F_B, tau_B, delta=None):
    """Rigid-body state derivative; returns the packed 12-vector
    [xi_dot, eta_dot, xi_ddot, eta_ddot].

    delta is an optional (delta_xi, delta_eta) pair of world-frame force
    (N) and moment (N m) disturbances.
    """
    dxi, deta = (np.zeros(3), np.zeros(3)) if delta is None else delta
    return _deriv12(
        state.vector12(),
        params,
        np.asarray(F_B, dtype=float),
        np.asarray(tau_B, dtype=float),
        np.asarray(dxi, dtype=float),
        np.asarray(deta, dtype=float),
    )
