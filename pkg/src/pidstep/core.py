"""Shared second-order plant abstraction, tracking-error signals, and the
bounded-adaptation projection rule used by every adaptive update in the
package.

The plant class covered here is

    X1_dot = X2
    X2_dot = f(X) + phi(X) theta + g U + disturbance

with known f and phi, unknown-but-bounded linear parameters theta, and an
unknown input matrix g known to lie in a per-entry interval.  Controllers
work with the estimate g_hat, which must stay invertible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

# |x_hat - bound| below this counts as sitting on the bound; exact float
# equality at a saturated bound is fragile under Euler stepping.
SATURATION_TOL = 1e-9

# g_hat is rejected as numerically singular beyond this condition number.
COND_LIMIT = 1e8


class ContractViolation(ValueError):
    """An operation was called outside its stated preconditions."""


class SingularInputMatrix(RuntimeError):
    """g_hat(t) is singular or too ill-conditioned to invert."""


@dataclass(frozen=True)
class Bounds1D:
    """Closed scalar interval [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ContractViolation(
                f"bounds require lo <= hi, got [{self.lo}, {self.hi}]"
            )


def _bounds_arrays(bounds, n):
    """Normalize the accepted bounds forms to (lo, hi) arrays of length n.

    Accepts a single Bounds1D (broadcast to all axes), a sequence of
    Bounds1D, or a (lo, hi) pair of array-likes.
    """
    if isinstance(bounds, Bounds1D):
        return np.full(n, bounds.lo), np.full(n, bounds.hi)
    if isinstance(bounds, tuple) and len(bounds) == 2 and not isinstance(bounds[0], Bounds1D):
        lo = np.broadcast_to(np.asarray(bounds[0], dtype=float), (n,))
        hi = np.broadcast_to(np.asarray(bounds[1], dtype=float), (n,))
        if np.any(lo > hi):
            raise ContractViolation("per-axis bounds require lo <= hi")
        return lo, hi
    seq = list(bounds)
    if len(seq) != n:
        raise ContractViolation(f"expected {n} per-axis bounds, got {len(seq)}")
    return (np.array([b.lo for b in seq]), np.array([b.hi for b in seq]))


def proj(x_hat, bounds, value, tol=SATURATION_TOL):
    """Projection rule halting adaptation drift at a known bound.

    Returns 0 when the estimate sits at the upper bound and the drive is
    positive, 0 when it sits at the lower bound and the drive is negative,
    and the drive unchanged otherwise.  Hard switching at the bound, no
    interior smoothing.
    """
    if not (bounds.lo - tol <= x_hat <= bounds.hi + tol):
        raise ContractViolation(
            f"estimate {x_hat} outside bounds [{bounds.lo}, {bounds.hi}]"
        )
    if x_hat >= bounds.hi - tol and value > 0.0:
        return 0.0
    if x_hat <= bounds.lo + tol and value < 0.0:
        return 0.0
    return value


def proj_vec(x_hat, bounds, value, tol=SATURATION_TOL):
    """Elementwise projection: applies `proj` on each axis."""
    x_hat = np.asarray(x_hat, dtype=float)
    value = np.asarray(value, dtype=float)
    if x_hat.shape != value.shape:
        raise ContractViolation("x_hat and value dimensions disagree")
    lo, hi = _bounds_arrays(bounds, x_hat.shape[0])
    if np.any(x_hat < lo - tol) or np.any(x_hat > hi + tol):
        raise ContractViolation("estimate outside per-axis bounds")
    out = value.copy()
    out[(x_hat >= hi - tol) & (value > 0.0)] = 0.0
    out[(x_hat <= lo + tol) & (value < 0.0)] = 0.0
    return out


@dataclass(frozen=True)
class ErrorSignals:
    """Backstepping error signals for one control loop.

    e1 is the tracking error, alpha the virtual velocity command
    stabilizing it, e2 the velocity-stage error, and e1_dot the raw
    tracking-error rate.  By construction e2 = e1_dot + k1 e1.
    """

    e1: np.ndarray
    e1_dot: np.ndarray
    e2: np.ndarray
    alpha: np.ndarray


def error_signals(X1, X2, X1d, X1d_dot, k1):
    """Build the two-stage error signals from states and references.

    k1 is the per-axis diagonal of the first-stage gain matrix (all
    entries must be positive).
    """
    X1 = np.asarray(X1, dtype=float)
    X2 = np.asarray(X2, dtype=float)
    X1d = np.asarray(X1d, dtype=float)
    X1d_dot = np.asarray(X1d_dot, dtype=float)
    k1 = np.asarray(k1, dtype=float)
    if not (X1.shape == X2.shape == X1d.shape == X1d_dot.shape == k1.shape):
        raise ContractViolation("error_signals: dimension mismatch")
    if np.any(k1 <= 0.0):
        raise ContractViolation("k1 entries must be strictly positive")
    e1 = X1 - X1d
    e1_dot = X2 - X1d_dot
    alpha = X1d_dot - k1 * e1
    e2 = X2 - alpha
    return ErrorSignals(e1=e1, e1_dot=e1_dot, e2=e2, alpha=alpha)


@dataclass
class SystemModel:
    """Second-order plant description as seen by the controller.

    f and phi are evaluators of the known drift and regressor at the
    current state, called as f(X1, X2) and phi(X1, X2).  g_hat is the
    time-indexed estimate of the input matrix, called as g_hat(t); it is
    condition-checked on every evaluation.  theta_bounds and g_bounds are
    the known parameter and input-matrix intervals, delta_bar the norm
    bound on the residual disturbance.
    """

    n: int
    l: int
    f: Callable
    phi: Callable
    g_hat: Callable
    theta_bounds: Sequence[Bounds1D]
    g_bounds: tuple
    delta_bar: float = 0.0
    _g_memo: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.l < 1:
            raise ContractViolation("n and l must be positive")
        if len(self.theta_bounds) != self.l:
            raise ContractViolation("theta_bounds must have one interval per parameter")
        g_lo = np.asarray(self.g_bounds[0], dtype=float)
        g_hi = np.asarray(self.g_bounds[1], dtype=float)
        if g_lo.shape != (self.n, self.n) or g_hi.shape != (self.n, self.n):
            raise ContractViolation("g_bounds must be (n, n) matrices")
        if np.any(g_lo > g_hi):
            raise ContractViolation("g_bounds require lo <= hi per entry")
        if self.delta_bar < 0.0:
            raise ContractViolation("delta_bar must be non-negative")
        self.g_bounds = (g_lo, g_hi)

    def g_matrix(self, t=0.0):
        """Evaluate g_hat(t), rejecting ill-conditioned matrices.

        The last evaluation is memoized per t; repeated queries at the
        same instant (two loops per control step) reuse it.
        """
        memo = self._g_memo
        if memo is not None and memo[0] == t:
            return memo[1]
        g = np.asarray(self.g_hat(t), dtype=float)
        if g.shape != (self.n, self.n):
            raise ContractViolation(f"g_hat must return ({self.n}, {self.n})")
        cond = np.linalg.cond(g)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SingularInputMatrix(
                f"g_hat(t={t}) condition number {cond:.3e} exceeds {COND_LIMIT:.0e}"
            )
        self._g_memo = (t, g)
        return g

    def theta_range(self):
        """theta_max - theta_min as a vector."""
        return np.array([b.hi - b.lo for b in self.theta_bounds])

    def g_range(self):
        """g_max - g_min as a matrix."""
        return self.g_bounds[1] - self.g_bounds[0]
