#!/usr/bin/env python3
"""Release a 0.2 kg payload mid-flight and watch the altitude loop absorb
the 10% step change in mass.

Until the drop the controller has adapted to the laden vehicle, so the
instant the mass leaves, the stored thrust compensation is wrong by about
1.1 m/s^2 upward.  The altitude pops, the disturbance estimate unwinds,
and the vehicle settles back onto the reference.
"""

import numpy as np

from pidstep import payload_drop_gains, payload_drop_trajectory, simulate

scenario = payload_drop_trajectory()
detach = scenario.payload.detach_time
m, tel = simulate(scenario, payload_drop_gains())

print(f"scenario: {scenario.duration:.0f} s flight, payload drops at "
      f"t = {detach:.0f} s while translating")
print(f"fault: {m.fault!r}")
print("MAE [x y z] = [%.2f %.2f %.2f] cm" % tuple(m.mae[:3] * 100))
print()

t = tel.column("t")
ez = tel.column("err_z")
dz = tel.column("dhat_z")
print(f"{'t [s]':>6}  {'z err [cm]':>11}  {'z dist. est. [m/s^2]':>21}")
for t0 in (16.0, 17.9, 18.5, 19.0, 20.0, 21.0, 22.0, 23.0, 25.0):
    i = int(np.searchsorted(t, t0))
    marker = "  <- drop" if abs(t0 - detach) < 0.6 else ""
    print(f"{t0:6.1f}  {ez[i] * 100:+11.2f}  {dz[i]:+21.3f}{marker}")

after = np.abs(ez[(t >= detach + 5.0) & (t <= scenario.duration - 1.0)])
peak = np.abs(ez[(t >= detach) & (t <= detach + 5.0)]).max()
print()
print(f"peak altitude excursion after the drop: {peak * 100:.1f} cm")
print(f"largest |z error| from detach+5 s to touchdown: {after.max() * 100:.1f} cm")
