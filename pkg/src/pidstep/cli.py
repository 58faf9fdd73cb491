"""Command-line front end.

Subcommands:
  simulate  run a scenario (built-in name or config file), write
            telemetry.csv and metrics.json
  tune      convert one gain triple between the PID and backstepping
            forms and report the feasibility bounds
  region    sweep a (kP, kD) grid and write the feasibility CSV

Every failure exits with a dedicated code and prints one machine-parseable
line to stderr of the form `error: <category>: <message>`:

  2  input    bad arguments, missing or unreadable files
  3  gains    infeasible or inconsistent gain set
  4  fault    the simulated plant faulted (files are still written)
  5  output   output files could not be written
"""

from __future__ import annotations

import argparse
import os
import sys

from . import gainmap, harness
from .controller import ConfigurationError
from .gainmap import InfeasibleGains

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_GAINS = 3
EXIT_FAULT = 4
EXIT_OUTPUT = 5

BUILTIN_SCENARIOS = ("figure8", "payload_drop", "hover")


def _fail(category, message, code):
    sys.stderr.write(f"error: {category}: {message}\n")
    return code


def _fmt(x):
    return f"{x:.6g}"


def _add_gain_flags(p):
    p.add_argument("--kp", type=float, help="proportional gain (PID form)")
    p.add_argument("--kd", type=float, help="derivative gain (PID form)")
    p.add_argument("--ki", type=float, help="integral gain (PID form, informational)")
    p.add_argument("--k1", type=float, help="first-stage gain (backstepping form)")
    p.add_argument("--k2", type=float, help="second-stage gain (backstepping form)")
    p.add_argument("--gamma", type=float, help="adaptation gain")
    p.add_argument("--adjusted", action=argparse.BooleanOptionalAction, default=None,
                   help="fold gamma into kP (adjusted PID form; default on)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pidstep",
        description="Adaptive backstepping / PID gain tooling and quadrotor simulation",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    ps = sub.add_parser("simulate", help="run a scenario and write telemetry + metrics")
    ps.add_argument("--scenario", default="figure8",
                    help="built-in name (%s) or config file path" % "|".join(BUILTIN_SCENARIOS))
    ps.add_argument("--out", default="out", help="output directory")
    ps.add_argument("--seed", type=int, help="override the scenario seed")
    ps.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="KEY=VALUE", help="override a scenario key (repeatable)")
    ps.add_argument("--robust-mode", choices=["constant", "nonlinear"],
                    help="robust feedback term mode")
    _add_gain_flags(ps)
    ps.set_defaults(func=cmd_simulate)

    pt = sub.add_parser("tune", help="convert gains and print feasibility bounds")
    _add_gain_flags(pt)
    pt.set_defaults(func=cmd_tune)

    pr = sub.add_parser("region", help="sweep the (kP, kD) feasibility region")
    pr.add_argument("--kp-range", required=True, metavar="LO:HI")
    pr.add_argument("--kd-range", required=True, metavar="LO:HI")
    pr.add_argument("--gamma", type=float, default=0.0)
    pr.add_argument("--resolution", type=int, default=50,
                    help="grid points per axis (>= 2)")
    pr.add_argument("--out", default="region.csv", help="output CSV path")
    pr.set_defaults(func=cmd_region)
    return parser


# ---------------------------------------------------------------------------
# simulate


def _apply_gain_flags(cfg, args):
    """Gain flags override the lateral (x, y) axes of the six-axis set."""
    have_pid = args.kp is not None or args.kd is not None
    have_bs = args.k1 is not None or args.k2 is not None
    if not have_pid and not have_bs and args.gamma is None:
        return
    if have_pid and have_bs:
        raise InfeasibleGains("give either --kp/--kd or --k1/--k2, not both")
    adjusted = bool(cfg["sim.adjusted"])
    gamma = args.gamma if args.gamma is not None else cfg["gains.gamma"][0]
    if have_pid:
        if args.kp is None or args.kd is None:
            raise InfeasibleGains("--kp and --kd must be given together")
        res = gainmap.backstepping_from_pid(
            args.kp, args.kd, gamma if adjusted else 0.0
        )
        k1, k2 = res.k1, res.k2
        if args.ki is not None and abs(args.ki - gamma * k1) > 1e-6 * (1 + abs(args.ki)):
            raise InfeasibleGains(
                f"--ki {_fmt(args.ki)} inconsistent with gamma*k1={_fmt(gamma * k1)}"
            )
    else:
        if args.k1 is None or args.k2 is None:
            raise InfeasibleGains("--k1 and --k2 must be given together")
        k1, k2 = args.k1, args.k2
    for i in (0, 1):
        cfg["gains.k1"][i] = k1
        cfg["gains.k2"][i] = k2
        cfg["gains.gamma"][i] = gamma


def cmd_simulate(args):
    name = args.scenario
    try:
        if name in BUILTIN_SCENARIOS:
            cfg = harness.scenario_defaults(name)
        else:
            if not os.path.exists(name):
                return _fail("input", f"scenario file not found: {name}", EXIT_INPUT)
            file_cfg = harness.parse_scenario_file(name)
            cfg = harness.default_config()
            cfg.update(file_cfg)
        for item in args.overrides:
            if "=" not in item:
                return _fail("input", f"--set expects KEY=VALUE, got {item!r}", EXIT_INPUT)
            key, _, value = item.partition("=")
            cfg[key.strip()] = harness.parse_config_value(value)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.robust_mode is not None:
            cfg["sim.robust_mode"] = args.robust_mode
        if args.adjusted is not None:
            cfg["sim.adjusted"] = args.adjusted
        _apply_gain_flags(cfg, args)
    except (InfeasibleGains, ConfigurationError) as exc:
        return _fail("gains", str(exc), EXIT_GAINS)
    except (OSError, ValueError) as exc:
        return _fail("input", str(exc), EXIT_INPUT)

    print("# effective configuration")
    for key in sorted(cfg):
        value = cfg[key]
        if isinstance(value, list):
            value = ",".join(_fmt(v) for v in value)
        print(f"{key} = {value}")

    try:
        scenario, gains, sim = harness.build_from_config(cfg)
    except (InfeasibleGains, ConfigurationError) as exc:
        return _fail("gains", str(exc), EXIT_GAINS)
    except ValueError as exc:
        return _fail("input", str(exc), EXIT_INPUT)

    try:
        run, telemetry = harness.simulate(scenario, gains, sim)
    except (InfeasibleGains, ConfigurationError) as exc:
        return _fail("gains", str(exc), EXIT_GAINS)

    try:
        os.makedirs(args.out, exist_ok=True)
        telemetry.to_csv(os.path.join(args.out, "telemetry.csv"))
        run.write_json(os.path.join(args.out, "metrics.json"))
    except OSError as exc:
        return _fail("output", str(exc), EXIT_OUTPUT)

    axes = ["x", "y", "z", "roll", "pitch", "yaw"]
    print("# results (%d control steps)" % len(telemetry))
    for i, a in enumerate(axes):
        print(f"mae.{a} = {_fmt(run.mae[i])}")
    print(f"saturation_count = {run.saturation_count}")
    print(f"files = {args.out}/telemetry.csv {args.out}/metrics.json")
    if run.fault is not None:
        return _fail("fault", run.fault, EXIT_FAULT)
    return EXIT_OK


# ---------------------------------------------------------------------------
# tune


def cmd_tune(args):
    if args.adjusted is None:
        args.adjusted = True
    gamma = args.gamma if args.gamma is not None else 0.0
    have_pid = args.kp is not None and args.kd is not None
    have_bs = args.k1 is not None and args.k2 is not None
    if have_pid == have_bs:
        return _fail("input", "give exactly one complete triple: "
                     "--kp/--kd/--gamma or --k1/--k2/--gamma", EXIT_INPUT)
    if have_bs:
        try:
            kP, kD, kI = gainmap.pid_from_backstepping(
                args.k1, args.k2, gamma, adjusted=args.adjusted
            )
        except InfeasibleGains as exc:
            return _fail("gains", str(exc), EXIT_GAINS)
        print(f"k1 = {_fmt(args.k1)}")
        print(f"k2 = {_fmt(args.k2)}")
        print(f"gamma = {_fmt(gamma)}")
        print(f"form = {'adjusted' if args.adjusted else 'plain'}")
        print(f"kP = {_fmt(kP)}")
        print(f"kD = {_fmt(kD)}")
        print(f"kI = {_fmt(kI)}")
        print(f"kP_max = {_fmt(gainmap.kp_max(kD, gamma))}")
        print(f"kD_min = {_fmt(gainmap.kd_min(kP, gamma) if args.adjusted else gainmap.kd_min(kP, 0.0))}")
        print("feasible = true")
        return EXIT_OK

    gamma_eff = gamma if args.adjusted else 0.0
    kp_lim = gainmap.kp_max(args.kd, gamma_eff) if args.kd > 0 else float("nan")
    try:
        res = gainmap.backstepping_from_pid(args.kp, args.kd, gamma_eff)
    except InfeasibleGains as exc:
        print(f"kP = {_fmt(args.kp)}")
        print(f"kD = {_fmt(args.kd)}")
        print(f"gamma = {_fmt(gamma)}")
        if args.kd > 0:
            print(f"kP_max = {_fmt(kp_lim)}")
        if args.kp - gamma_eff - 1.0 >= 0.0 and args.kd > 0:
            print(f"kD_min = {_fmt(gainmap.kd_min(args.kp, gamma_eff))}")
        print("feasible = false")
        return _fail("gains", str(exc), EXIT_GAINS)
    kI = gamma * res.k1
    print(f"kP = {_fmt(args.kp)}")
    print(f"kD = {_fmt(args.kd)}")
    print(f"gamma = {_fmt(gamma)}")
    print(f"k1 = {_fmt(res.k1)}")
    print(f"k2 = {_fmt(res.k2)}")
    print(f"kI = {_fmt(kI)}")
    print(f"kP_max = {_fmt(kp_lim)}")
    print(f"kD_min = {_fmt(gainmap.kd_min(args.kp, gamma_eff))}")
    print(f"boundary = {'true' if res.boundary else 'false'}")
    print("feasible = true")
    return EXIT_OK


# ---------------------------------------------------------------------------
# region


def _parse_range(text):
    lo, _, hi = text.partition(":")
    return float(lo), float(hi)


def cmd_region(args):
    try:
        kp_range = _parse_range(args.kp_range)
        kd_range = _parse_range(args.kd_range)
    except ValueError:
        return _fail("input", "ranges must be LO:HI numbers", EXIT_INPUT)
    try:
        points = gainmap.feasibility_sweep(kp_range, kd_range, args.gamma,
                                           args.resolution)
    except ValueError as exc:
        return _fail("input", str(exc), EXIT_INPUT)
    try:
        gainmap.write_feasibility_csv(points, args.out)
    except OSError as exc:
        return _fail("output", str(exc), EXIT_OUTPUT)
    feasible = sum(1 for p in points if p.feasible)
    print(f"points = {len(points)}")
    print(f"feasible = {feasible}")
    print(f"file = {args.out}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
