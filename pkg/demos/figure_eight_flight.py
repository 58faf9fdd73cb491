#!/usr/bin/env python3
"""Fly the laden figure-eight with the wind gust, first with the initial
gain set and then with the re-tuned lateral pair, and compare tracking.

The re-tune keeps kP at its feasibility ceiling and doubles kD, which the
gain map converts to (k1, k2) = (2 + sqrt(3), 2 - sqrt(3)); the higher k1
also speeds the disturbance adaptation (kI = gamma k1), so the gust gets
rejected visibly faster.
"""

import os

import numpy as np

from pidstep import baseline_gains, figure_eight_scenario, fine_tuned_gains, simulate

out_dir = os.path.join(os.path.dirname(__file__) or ".", "figure8_out")
os.makedirs(out_dir, exist_ok=True)

axes = ["x", "y", "z", "roll", "pitch", "yaw"]
runs = {}
for label, gains in [("baseline", baseline_gains()),
                     ("fine-tuned", fine_tuned_gains())]:
    m, tel = simulate(figure_eight_scenario(), gains)
    runs[label] = (m, tel)
    path = os.path.join(out_dir, f"telemetry_{label.replace('-', '_')}.csv")
    tel.to_csv(path)
    print(f"{label:>10}: fault={m.fault!r}  "
          "MAE [x y z] = [%5.2f %5.2f %5.2f] cm,  yaw %.3f deg" % (
              m.mae[0] * 100, m.mae[1] * 100, m.mae[2] * 100,
              np.degrees(m.mae[5])))
    print(f"{'':>10}  telemetry -> {path}")

base, tuned = runs["baseline"][0], runs["fine-tuned"][0]
print()
for i in (0, 1):
    red = (1.0 - tuned.mae[i] / base.mae[i]) * 100.0
    print(f"lateral axis {axes[i]}: error reduced {red:.1f}% by the re-tune")

_, tel = runs["fine-tuned"]
t = tel.column("t")
print()
print("gust response on x (gust steps in at t = 11 s):")
for t0 in (10.5, 11.5, 13.0, 15.0, 18.0, 22.0):
    i = int(np.searchsorted(t, t0))
    print(f"  t={t0:5.1f} s  x error {tel.column('err_x')[i] * 100:+7.2f} cm  "
          f"disturbance estimate {tel.column('dhat_x')[i]:+.3f} m/s^2")
print("the estimate converges toward the gust-induced acceleration and the")
print("error returns to the pre-gust band")
