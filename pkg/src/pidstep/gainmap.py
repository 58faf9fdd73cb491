"""Bidirectional conversion between backstepping gains (k1, k2, gamma) and
PID gains (kP, kD, kI), the feasibility bounds linking them, and grid
sweeps of the feasible region.

Forward map (per axis):

    kP = 1 + k1 k2            (+ gamma in the adjusted form)
    kD = k1 + k2
    kI = gamma k1

The reverse map solves  k^2 - kD k + (kP - gamma - 1) = 0  and assigns
k1 = max root, k2 = min root.  Real positive roots exist only inside the
region bounded by kP_max(kD) and kD_min(kP).
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

# Discriminants in [-DISC_SNAP, 0] are snapped to zero: exact arithmetic on
# the region boundary lands there through float rounding.
DISC_SNAP = 1e-12


class InfeasibleGains(ValueError):
    """PID gain combination has no real positive backstepping equivalent."""


@dataclass(frozen=True)
class GainConversionResult:
    """One axis of a PID -> backstepping conversion."""

    k1: float
    k2: float
    discriminant: float
    boundary: bool  # repeated root, i.e. the kP_max / kD_min edge


@dataclass(frozen=True)
class FeasibilityPoint:
    """One grid sample of a feasibility sweep."""

    kP: float
    kD: float
    gamma: float
    feasible: bool
    k1: Optional[float] = None
    k2: Optional[float] = None


def pid_from_backstepping(k1, k2, gamma, adjusted=True):
    """Forward gain map for one axis; returns (kP, kD, kI)."""
    if k1 <= 0.0 or k2 <= 0.0:
        raise InfeasibleGains(f"k1 and k2 must be positive, got ({k1}, {k2})")
    if gamma < 0.0:
        raise InfeasibleGains(f"gamma must be non-negative, got {gamma}")
    kP = 1.0 + k1 * k2
    if adjusted:
        kP += gamma
    return kP, k1 + k2, gamma * k1


def kp_max(kD, gamma):
    """Largest kP realizable at a given kD."""
    if kD <= 0.0:
        raise InfeasibleGains(f"kD must be positive, got {kD}")
    return kD * kD / 4.0 + 1.0 + gamma


def kd_min(kP, gamma):
    """Smallest kD realizable at a given kP."""
    radicand = kP - gamma - 1.0
    if -DISC_SNAP <= radicand < 0.0:
        radicand = 0.0
    if radicand < 0.0:
        raise InfeasibleGains(
            f"kD_min undefined: kP={kP} below 1+gamma={1.0 + gamma}"
        )
    return 2.0 * math.sqrt(radicand)


def backstepping_from_pid(kP, kD, gamma):
    """Reverse gain map for one axis.

    Raises InfeasibleGains when the quadratic has complex roots (kP above
    the kP_max parabola) or a non-positive minimum root (kP <= 1+gamma).
    """
    if kD <= 0.0:
        raise InfeasibleGains(f"kD must be positive, got {kD}")
    c = kP - gamma - 1.0
    disc = kD * kD - 4.0 * c
    if -DISC_SNAP <= disc < 0.0:
        disc = 0.0
    if disc < 0.0:
        raise InfeasibleGains(
            f"kP={kP:.6g} exceeds k_P,max={kp_max(kD, gamma):.2f} "
            f"at kD={kD:.6g}, gamma={gamma:.6g} (complex roots)"
        )
    root = math.sqrt(disc)
    hi = (kD + root) / 2.0
    lo = (kD - root) / 2.0
    if lo <= 0.0:
        raise InfeasibleGains(
            f"kP={kP:.6g} at or below 1+gamma={1.0 + gamma:.6g}: "
            "no strictly positive k2"
        )
    return GainConversionResult(k1=hi, k2=lo, discriminant=disc, boundary=(root == 0.0))


def try_backstepping_from_pid(kP, kD, gamma):
    """Non-raising variant; returns None when infeasible."""
    try:
        return backstepping_from_pid(kP, kD, gamma)
    except InfeasibleGains:
        return None


def feasibility_sweep(kP_range, kD_range, gamma, resolution):
    """Grid-evaluate the reverse map over [kP_lo, kP_hi] x [kD_lo, kD_hi].

    resolution is the number of samples per axis (>= 2).  Returns the
    points in row-major order, kP varying fastest.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    kP_lo, kP_hi = kP_range
    kD_lo, kD_hi = kD_range
    if not (kP_lo <= kP_hi and kD_lo <= kD_hi):
        raise ValueError("ranges must be non-empty")
    points = []
    for kD in np.linspace(kD_lo, kD_hi, resolution):
        for kP in np.linspace(kP_lo, kP_hi, resolution):
            res = try_backstepping_from_pid(kP, float(kD), gamma) if kD > 0 else None
            if res is None:
                points.append(FeasibilityPoint(float(kP), float(kD), gamma, False))
            else:
                points.append(
                    FeasibilityPoint(float(kP), float(kD), gamma, True, res.k1, res.k2)
                )
    return points


def write_feasibility_csv(points, path):
    """Write sweep results as CSV (atomic: temp file + rename)."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".csv.tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kP", "kD", "gamma", "feasible", "k1", "k2"])
            for p in points:
                writer.writerow(
                    [
                        repr(p.kP),
                        repr(p.kD),
                        repr(p.gamma),
                        int(p.feasible),
                        "" if p.k1 is None else repr(p.k1),
                        "" if p.k2 is None else repr(p.k2),
                    ]
                )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
