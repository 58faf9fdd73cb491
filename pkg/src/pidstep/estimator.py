"""Recursive least squares with exponential forgetting and per-parameter
projection, used to track the unknown linear plant parameters online.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ContractViolation, _bounds_arrays


class CovarianceLostDefiniteness(RuntimeError):
    """P is no longer positive definite; caller should reset to the prior."""


@dataclass
class RlsState:
    theta_hat: np.ndarray
    P: np.ndarray  # covariance, symmetric positive definite
    lam: float = 0.995  # forgetting factor in (0, 1]

    @classmethod
    def initial(cls, l, p0=10.0, theta0=None, lam=0.995):
        theta = np.zeros(l) if theta0 is None else np.asarray(theta0, dtype=float).copy()
        return cls(theta_hat=theta, P=p0 * np.eye(l), lam=lam)


def _check_positive_definite(P):
    if P.shape == (2, 2):
        # trace/determinant test, exact for 2x2
        return P[0, 0] > 0.0 and P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0] > 0.0
    if P.shape == (1, 1):
        return P[0, 0] > 0.0
    return np.linalg.eigvalsh(P).min() > 0.0


def rls_update(state, regressor, residual, bounds):
    """One scalar-observation RLS step with projection to the bounds.

    `residual` is the prediction error of the current estimate,
    y - phi . theta_hat.  K = P phi / (lam + phi' P phi), theta += K
    residual (then clamped per axis), P <- (P - K phi' P) / lam
    re-symmetrized.  Raises CovarianceLostDefiniteness when the updated P
    stops being positive definite, signalling a reset to the prior.
    """
    if not 0.0 < state.lam <= 1.0:
        raise ContractViolation(f"forgetting factor must be in (0, 1], got {state.lam}")
    phi = np.asarray(regressor, dtype=float)
    if phi.shape != state.theta_hat.shape:
        raise ContractViolation("regressor length must match theta_hat")
    lo, hi = _bounds_arrays(bounds, phi.shape[0])

    Pphi = state.P @ phi
    denom = state.lam + phi @ Pphi
    K = Pphi / denom
    theta = state.theta_hat + K * float(residual)
    theta = np.clip(theta, lo, hi)
    P = (state.P - np.outer(K, Pphi)) / state.lam
    P = 0.5 * (P + P.T)
    if not _check_positive_definite(P):
        raise CovarianceLostDefiniteness(
            "covariance update lost positive definiteness; reset to prior"
        )
    return RlsState(theta_hat=theta, P=P, lam=state.lam)
