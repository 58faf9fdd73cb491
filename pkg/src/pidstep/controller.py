"""Adaptive robust control law for the second-order plant class, together
with its two-degree-of-freedom PID reformulation.

The native form is

    U = g_hat^-1 (-e1 + alpha_dot - f - phi theta_hat - k2 e2 - d_c_hat + u_r)

with the lumped low-frequency disturbance estimate d_c_hat adapted by the
projected law d_c_hat_dot = Proj(gamma e2), and the robust feedback term
u_r = -(h^2 / 4 eps) e2 (or -k20 e2 with a constant substitute gain).

Expanding alpha and e2 turns the same law into a two-DOF controller: a PID
feedback component on (e1, e1_dot, integral of e1) plus feedforward model
compensation.  The gain correspondence is kP = 1 + k1 k2 (+ gamma in the
adjusted form), kD = k1 + k2, kI = gamma k1, with the integral state
driven by e1 + k1^-1 e1_dot (or just e1 in the adjusted form).  With the
constant robust gain folded into k2 the two forms produce identical
outputs for matched adaptation states.

Both laws are pure state machines: (state, inputs) -> (U, new state).
Adaptation ODEs advance by one forward-Euler step per call, clamped to
their bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import ContractViolation, SATURATION_TOL

ROBUST_NONLINEAR = "nonlinear"
ROBUST_CONSTANT = "constant"

# Tolerance of the PID-vs-backstepping gain consistency gate.
_GAIN_MATCH_TOL = 1e-9


class ConfigurationError(ValueError):
    """Controller inputs are mutually inconsistent."""


@dataclass(frozen=True)
class BacksteppingGains:
    """Per-axis diagonals of the two stage gains and the adaptation rate."""

    k1: np.ndarray
    k2: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "k1", np.atleast_1d(np.asarray(self.k1, dtype=float)))
        object.__setattr__(self, "k2", np.atleast_1d(np.asarray(self.k2, dtype=float)))
        object.__setattr__(self, "gamma", np.atleast_1d(np.asarray(self.gamma, dtype=float)))
        if not (self.k1.shape == self.k2.shape == self.gamma.shape):
            raise ConfigurationError("gain vectors must share one length")
        if np.any(self.k1 <= 0.0) or np.any(self.k2 <= 0.0):
            raise ConfigurationError("k1 and k2 entries must be strictly positive")
        if np.any(self.gamma < 0.0):
            raise ConfigurationError("gamma entries must be non-negative")

    @property
    def n(self):
        return self.k1.shape[0]


@dataclass(frozen=True)
class PidGains:
    """Per-axis diagonals of the PID feedback component."""

    kP: np.ndarray
    kD: np.ndarray
    kI: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kP", np.atleast_1d(np.asarray(self.kP, dtype=float)))
        object.__setattr__(self, "kD", np.atleast_1d(np.asarray(self.kD, dtype=float)))
        object.__setattr__(self, "kI", np.atleast_1d(np.asarray(self.kI, dtype=float)))
        if not (self.kP.shape == self.kD.shape == self.kI.shape):
            raise ConfigurationError("gain vectors must share one length")
        if np.any(self.kD <= 0.0):
            raise ConfigurationError("kD entries must be strictly positive")


@dataclass(frozen=True)
class RobustTermConfig:
    """Robust feedback term configuration.

    mode "nonlinear" uses -(h^2 / 4 epsilon) e2 with h from the model
    bounds; mode "constant" substitutes a fixed gain: -k20 e2.
    """

    mode: str = ROBUST_CONSTANT
    epsilon: float = 0.25
    k20: float = 0.0

    def __post_init__(self):
        if self.mode not in (ROBUST_NONLINEAR, ROBUST_CONSTANT):
            raise ConfigurationError(f"unknown robust mode {self.mode!r}")
        if self.epsilon <= 0.0:
            raise ConfigurationError("epsilon must be positive")
        if np.any(np.asarray(self.k20) < 0.0):
            raise ConfigurationError("k20 must be non-negative")


@dataclass
class ControllerState:
    """Mutable-per-step controller memory.

    d_c_hat     lumped low-frequency disturbance estimate (acceleration
                level), kept inside [-d_bar, d_bar] per axis
    e1_integral integral state of the PID form, kept inside
                [-e1_int_bound, e1_int_bound] when a bound applies
    e1_dot_filtered  low-pass state for the error-rate channel
    u_prev      previous control input, feeds the h bound
    """

    d_c_hat: np.ndarray
    e1_integral: np.ndarray
    e1_dot_filtered: np.ndarray
    u_prev: np.ndarray
    d_bar: float
    e1_int_bound: Optional[float] = None

    @classmethod
    def zeros(cls, n, d_bar, e1_int_bound=None):
        if d_bar < 0.0:
            raise ConfigurationError("d_bar must be non-negative")
        return cls(
            d_c_hat=np.zeros(n),
            e1_integral=np.zeros(n),
            e1_dot_filtered=np.zeros(n),
            u_prev=np.zeros(n),
            d_bar=float(d_bar),
            e1_int_bound=e1_int_bound,
        )


def advance_bounded_estimate(x, drive, lo, hi, dt, tol=SATURATION_TOL):
    """One forward-Euler step of a projected adaptation law.

    The drive is zeroed on axes sitting at a bound and pushing outward,
    then the stepped estimate is clamped back to [lo, hi]; by induction
    the estimate can never leave its bounds.
    """
    d = np.array(drive, dtype=float, copy=True)
    d[(x >= hi - tol) & (d > 0.0)] = 0.0
    d[(x <= lo + tol) & (d < 0.0)] = 0.0
    return np.clip(x + dt * d, lo, hi)


def h_bound(model, phi_val, u_prev):
    """Evaluate the robust-gain bound from the model's uncertainty ranges.

    h >= |phi| |theta_max - theta_min| + |U| |g_max - g_min| + delta_bar,
    with the previous control input standing in for U (the one-step lag
    breaks the circular dependence of h on the current command).
    """
    phi_val = np.asarray(phi_val, dtype=float)
    if phi_val.ndim == 1:
        phi_val = phi_val.reshape(-1, 1)
    phi_norm = np.linalg.norm(phi_val, 2)
    theta_span = np.linalg.norm(model.theta_range())
    g_span = np.linalg.norm(model.g_range(), 2)
    u_norm = np.linalg.norm(u_prev)
    return phi_norm * theta_span + u_norm * g_span + model.delta_bar


def robust_term(errs, h, robust):
    """Robust feedback u_r; always opposes e2, so e2 . u_r <= 0."""
    if robust.mode == ROBUST_NONLINEAR:
        if h < 0.0:
            raise ContractViolation("h must be non-negative")
        return -(h * h / (4.0 * robust.epsilon)) * errs.e2
    return -np.asarray(robust.k20, dtype=float) * errs.e2


def control_arc(model, X1, X2, errs, alpha_dot, theta_hat, state, gains, robust, dt, t=0.0):
    """Adaptive robust control step in the native backstepping form.

    Returns (U, new_state) with d_c_hat advanced one projected Euler step
    of gamma e2 and u_prev refreshed.  X1 and X2 are passed alongside the
    error signals because f and phi are evaluated at the current state.
    """
    g = model.g_matrix(t)
    f_val = np.asarray(model.f(X1, X2), dtype=float)
    phi_val = np.asarray(model.phi(X1, X2), dtype=float)

    if robust.mode == ROBUST_NONLINEAR:
        h = h_bound(model, phi_val, state.u_prev)
        u_r = -(h * h / (4.0 * robust.epsilon)) * errs.e2
    else:
        u_r = -np.asarray(robust.k20, dtype=float) * errs.e2

    rhs = (
        -errs.e1
        + alpha_dot
        - f_val
        - phi_val @ theta_hat
        - gains.k2 * errs.e2
        - state.d_c_hat
        + u_r
    )
    U = np.linalg.solve(g, rhs)
    if not np.isfinite(U).all():
        raise ContractViolation("non-finite control output; check inputs for NaN")

    d_new = advance_bounded_estimate(
        state.d_c_hat, gains.gamma * errs.e2, -state.d_bar, state.d_bar, dt
    )
    return U, replace(state, d_c_hat=d_new, u_prev=U)


def filter_e1_dot(raw, state, tau_f, dt):
    """Selective low-pass of the error-rate channel.

    First-order update y += dt/(tau_f + dt) (raw - y); tau_f = 0 disables
    the filter and passes raw through.  Only the rate channel is ever
    filtered; e1 stays raw.  Returns (filtered, new_state).
    """
    if tau_f < 0.0:
        raise ConfigurationError("tau_f must be non-negative")
    if tau_f == 0.0:
        return np.asarray(raw, dtype=float), state
    y = state.e1_dot_filtered + (dt / (tau_f + dt)) * (raw - state.e1_dot_filtered)
    return y, replace(state, e1_dot_filtered=y)


def _expected_pid(gains, adjusted):
    kP = 1.0 + gains.k1 * gains.k2
    if adjusted:
        kP = kP + gains.gamma
    return kP, gains.k1 + gains.k2, gains.gamma * gains.k1


def control_pid(model, X1, X2, ref, theta_hat, state, pid, gains, adjusted=True,
                dt=0.0, tau_f=0.0, t=0.0):
    """Control step in the two-DOF PID-plus-feedforward form.

    ref is the (X1d, X1d_dot, X1d_ddot) triple.  The pid gains must agree
    with the backstepping gains through the forward gain map for the given
    `adjusted` flag; mismatches raise ConfigurationError.  The integral
    state advances by the projected drive e1 + k1^-1 e1_dot, or by e1 in
    the adjusted form (where gamma is already folded into kP).
    """
    kP_e, kD_e, kI_e = _expected_pid(gains, adjusted)
    if (
        np.max(np.abs(pid.kP - kP_e)) > _GAIN_MATCH_TOL * (1.0 + np.max(np.abs(kP_e)))
        or np.max(np.abs(pid.kD - kD_e)) > _GAIN_MATCH_TOL * (1.0 + np.max(np.abs(kD_e)))
        or np.max(np.abs(pid.kI - kI_e)) > _GAIN_MATCH_TOL * (1.0 + np.max(np.abs(kI_e)))
    ):
        raise ConfigurationError(
            "pid gains do not match the backstepping gains under the "
            f"{'adjusted' if adjusted else 'plain'} gain map"
        )

    X1d, X1d_dot, X1d_ddot = ref
    e1 = X1 - X1d
    e1_dot = X2 - X1d_dot
    if tau_f > 0.0:
        e1_dot, state = filter_e1_dot(e1_dot, state, tau_f, dt)

    g = model.g_matrix(t)
    f_val = np.asarray(model.f(X1, X2), dtype=float)
    phi_val = np.asarray(model.phi(X1, X2), dtype=float)

    rhs = (
        -pid.kP * e1
        - pid.kD * e1_dot
        - pid.kI * state.e1_integral
        + X1d_ddot
        - f_val
        - phi_val @ theta_hat
    )
    U = np.linalg.solve(g, rhs)
    if not np.isfinite(U).all():
        raise ContractViolation("non-finite control output; check inputs for NaN")

    drive = e1 if adjusted else e1 + e1_dot / gains.k1
    bound = state.e1_int_bound
    if bound is None:
        positive = pid.kI[pid.kI > 0.0]
        bound = state.d_bar / positive.min() if positive.size else np.inf
    eI = advance_bounded_estimate(state.e1_integral, drive, -bound, bound, dt)
    return U, replace(state, e1_integral=eI, u_prev=U)
