#!/usr/bin/env python3
"""Sweep the (kP, kD) plane and show which PID gain pairs are realizable
by the backstepping law.  Writes region.csv next to this script and, when
matplotlib is importable, region.png with the kp_max parabola overlaid.
"""

import os

import numpy as np

from pidstep import feasibility_sweep, kp_max, write_feasibility_csv

GAMMA = 0.4
RES = 81

points = feasibility_sweep((1.0, 8.0), (0.5, 5.0), GAMMA, RES)
out_csv = os.path.join(os.path.dirname(__file__) or ".", "region.csv")
write_feasibility_csv(points, out_csv)

feasible = [p for p in points if p.feasible]
print(f"grid {RES}x{RES} over kP in [1, 8], kD in [0.5, 5], gamma={GAMMA}")
print(f"feasible points: {len(feasible)}/{len(points)}")
print(f"csv written to {out_csv}")

# text rendering: one row per kD sample (coarsened), '#' feasible
print()
coarse = 33
sub = feasibility_sweep((1.0, 8.0), (0.5, 5.0), GAMMA, coarse)
grid = np.array([p.feasible for p in sub]).reshape(coarse, coarse)
for i in reversed(range(0, coarse, 2)):
    kd = 0.5 + (5.0 - 0.5) * i / (coarse - 1)
    line = "".join("#" if f else "." for f in grid[i])
    print(f"kD={kd:4.1f} |{line}|")
print("        kP = 1 " + " " * (coarse - 10) + "kP = 8")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kps = np.array([p.kP for p in points]).reshape(RES, RES)
    kds = np.array([p.kD for p in points]).reshape(RES, RES)
    feas = np.array([p.feasible for p in points]).reshape(RES, RES)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.contourf(kps, kds, feas, levels=[-0.5, 0.5, 1.5], colors=["w", "tab:green"],
                alpha=0.6)
    kd_line = np.linspace(0.5, 5.0, 200)
    ax.plot([kp_max(k, GAMMA) for k in kd_line], kd_line, "r-",
            label="kP_max(kD)")
    ax.set_xlabel("kP")
    ax.set_ylabel("kD")
    ax.set_title(f"realizable PID gains, gamma={GAMMA}")
    ax.legend()
    out_png = os.path.join(os.path.dirname(__file__) or ".", "region.png")
    fig.savefig(out_png, dpi=120, bbox_inches="tight")
    print(f"\nplot written to {out_png}")
except ImportError:
    print("\nmatplotlib not available; skipped the plot")
