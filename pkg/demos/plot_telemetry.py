#!/usr/bin/env python3
"""Plot a telemetry CSV produced by `pidstep simulate` (or the demos).

Usage: python demos/plot_telemetry.py out/telemetry.csv [plots.png]
"""

import sys

import numpy as np

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required for this script")


def main(argv):
    if not argv:
        sys.exit(__doc__)
    path = argv[0]
    out = argv[1] if len(argv) > 1 else "plots.png"
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    col = {name: data[:, i] for i, name in enumerate(header)}
    t = col["t"]

    fig, axes = plt.subplots(2, 2, figsize=(11, 7))

    ax = axes[0, 0]
    ax.plot(col["x_ref"], col["y_ref"], "k--", label="reference")
    ax.plot(col["x"], col["y"], label="flown")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("lateral path")
    ax.legend()
    ax.axis("equal")

    ax = axes[0, 1]
    for name in ("err_x", "err_y", "err_z"):
        ax.plot(t, col[name] * 100.0, label=name)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("error [cm]")
    ax.set_title("position tracking errors")
    ax.legend()

    ax = axes[1, 0]
    ax.plot(t, col["z_ref"], "k--", label="z ref")
    ax.plot(t, col["z"], label="z")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("altitude [m]")
    if col["flag_payload"].any():
        drops = t[np.diff(col["flag_payload"], prepend=col["flag_payload"][0]) < 0]
        for td in drops:
            ax.axvline(td, color="r", ls=":", label="payload drop")
    ax.set_title("altitude")
    ax.legend()

    ax = axes[1, 1]
    for name in ("dhat_x", "dhat_y", "dhat_z"):
        ax.plot(t, col[name], label=name)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("estimate [m/s^2]")
    ax.set_title("disturbance estimates")
    ax.legend()

    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(f"wrote {out}")


if __name__ == "__main__":
    main(sys.argv[1:])
