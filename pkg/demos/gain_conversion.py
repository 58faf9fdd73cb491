#!/usr/bin/env python3
"""Walk through the gain algebra linking the backstepping and PID forms.

Every (k1, k2, gamma) triple maps to PID gains; the reverse direction
solves a quadratic and only works inside a feasibility region bounded by
kP_max(kD) and kD_min(kP).
"""

import math

from pidstep import backstepping_from_pid, kd_min, kp_max, pid_from_backstepping

print("forward: backstepping (k1, k2, gamma) -> PID (kP, kD, kI)")
for k1, k2, gamma in [(1.0, 1.0, 0.4), (2.6, 0.4, 0.4), (30.0, 0.3, 1.0)]:
    kP, kD, kI = pid_from_backstepping(k1, k2, gamma, adjusted=True)
    print(f"  k1={k1:<5g} k2={k2:<5g} gamma={gamma:<4g} ->"
          f" kP={kP:<6g} kD={kD:<6g} kI={kI:g}")

print()
print("reverse: PID (kP, kD) -> backstepping roots")
for kP, kD, gamma in [(2.4, 2.0, 0.4), (2.4, 4.0, 0.4)]:
    res = backstepping_from_pid(kP, kD, gamma)
    tag = " (repeated root: the feasibility boundary)" if res.boundary else ""
    print(f"  kP={kP} kD={kD} -> k1={res.k1:.6f} k2={res.k2:.6f}{tag}")

print()
print("the region limits for gamma = 0.4:")
print(f"  at kD=2   the largest realizable kP is kp_max = {kp_max(2.0, 0.4):g}")
print(f"  at kP=2.4 the smallest realizable kD is kd_min = {kd_min(2.4, 0.4):g}")

print()
print("a practical tuning move: same kP, double kD to damp overshoot")
res = backstepping_from_pid(2.4, 4.0, 0.4)
print(f"  kD 2 -> 4 keeps kP=2.4 feasible (kp_max={kp_max(4.0, 0.4):g})"
      f" and lands on k1={res.k1:.4f}, k2={res.k2:.4f}")
print(f"  exact values: 2 + sqrt(3) = {2 + math.sqrt(3):.6f},"
      f" 2 - sqrt(3) = {2 - math.sqrt(3):.6f}")
