"""Acceptance suite: one test per criterion, each printing a PASS/FAIL
line with its headline number and runtime (run pytest with -s to see
them).  Tolerances are fixed here, not tuned at runtime.
"""

import math
import time

import numpy as np
import pytest

from pidstep.controller import (
    BacksteppingGains,
    ControllerState,
    PidGains,
    RobustTermConfig,
    advance_bounded_estimate,
    control_arc,
    control_pid,
    robust_term,
)
from pidstep.core import Bounds1D, ErrorSignals, SystemModel, error_signals
from pidstep.estimator import RlsState, rls_update
from pidstep.gainmap import backstepping_from_pid, kd_min, kp_max
from pidstep.harness import (
    SimConfig,
    baseline_gains,
    figure_eight_scenario,
    fine_tuned_gains,
    payload_drop_gains,
    payload_drop_trajectory,
    rk4_step,
    simulate,
)
from pidstep.quadrotor import (
    QuadrotorParams,
    rotor_speeds_sq_from_wrench,
    thrust_and_attitude_from_u,
    world_force,
    wrench_from_rotor_speeds_sq,
)


def report(name, ok, detail, t0):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] {name}: {detail} ({time.perf_counter() - t0:.2f} s)")
    assert ok, f"{name}: {detail}"


def test_criterion_01_gain_conversion_golden_values():
    t0 = time.perf_counter()
    a = backstepping_from_pid(2.4, 2.0, 0.4)
    b = backstepping_from_pid(2.4, 4.0, 0.4)
    err = max(
        abs(a.k1 - 1.0), abs(a.k2 - 1.0),
        abs(b.k1 - (2.0 + math.sqrt(3.0))), abs(b.k2 - (2.0 - math.sqrt(3.0))),
    )
    report("criterion 1 gain-conversion golden values", err < 1e-10,
           f"max deviation {err:.2e} (tol 1e-10)", t0)


def test_criterion_02_bound_formulas_and_repeated_roots():
    t0 = time.perf_counter()
    exact = kp_max(2.0, 0.4) == pytest.approx(2.4, abs=1e-12) and \
        kd_min(2.4, 0.4) == pytest.approx(2.0, abs=1e-12)
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(10_000):
        kD = rng.uniform(0.02, 20.0)
        gamma = rng.uniform(0.0, 10.0)
        res = backstepping_from_pid(kp_max(kD, gamma), kD, gamma)
        worst = max(worst, abs(res.k1 - res.k2))
    report("criterion 2 feasibility bound formulas", exact and worst < 1e-6,
           f"repeated-root split worst {worst:.2e} over 1e4 draws (tol 1e-6)", t0)


def test_criterion_03_arc_pid_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    n, l = 6, 2
    total, batch = 100_000, 500
    worst = 0.0
    zero6 = np.zeros(n)
    for _ in range(total // batch):
        A = rng.normal(size=(n, n))
        g = A @ A.T + n * np.eye(n)
        f_val = rng.normal(size=n)
        phi_val = rng.normal(size=(n, l))
        theta_hat = rng.normal(size=l)
        k1 = rng.uniform(0.2, 5.0, n)
        k2 = rng.uniform(0.2, 5.0, n)
        gamma = rng.uniform(0.05, 2.0, n)
        k20 = rng.uniform(0.0, 1.0)
        gains = BacksteppingGains(k1, k2, gamma)
        folded = BacksteppingGains(k1, k2 + k20, gamma)
        kI = gamma * k1
        pid = PidGains(1.0 + k1 * (k2 + k20), k1 + k2 + k20, kI)
        robust = RobustTermConfig(mode="constant", k20=k20)
        model = SystemModel(
            n=n, l=l,
            f=lambda X1, X2, _v=f_val: _v,
            phi=lambda X1, X2, _v=phi_val: _v,
            g_hat=lambda t, _g=g: _g,
            theta_bounds=[Bounds1D(-3.0, 3.0)] * l,
            g_bounds=(g - 1.0, g + 1.0),
            delta_bar=0.1,
        )
        X1s = rng.normal(size=(batch, n))
        X2s = rng.normal(size=(batch, n))
        refs = rng.normal(size=(batch, 3, n))
        dcs = rng.uniform(-1.0, 1.0, size=(batch, n))
        for j in range(batch):
            X1, X2 = X1s[j], X2s[j]
            X1d, X1d_dot, X1d_ddot = refs[j]
            e1 = X1 - X1d
            e1_dot = X2 - X1d_dot
            errs = ErrorSignals(e1=e1, e1_dot=e1_dot, e2=e1_dot + k1 * e1,
                                alpha=X1d_dot - k1 * e1)
            alpha_dot = X1d_ddot - k1 * e1_dot
            st_a = ControllerState(d_c_hat=dcs[j], e1_integral=zero6,
                                   e1_dot_filtered=zero6, u_prev=zero6,
                                   d_bar=50.0)
            st_p = ControllerState(d_c_hat=zero6, e1_integral=dcs[j] / kI,
                                   e1_dot_filtered=zero6, u_prev=zero6,
                                   d_bar=50.0, e1_int_bound=1e9)
            U1, _ = control_arc(model, X1, X2, errs, alpha_dot, theta_hat,
                                st_a, gains, robust, dt=0.005)
            U2, _ = control_pid(model, X1, X2, (X1d, X1d_dot, X1d_ddot),
                                theta_hat, st_p, pid, folded, adjusted=False,
                                dt=0.005)
            d = np.max(np.abs(U1 - U2))
            if d > worst:
                worst = d
    report("criterion 3 backstepping/PID equivalence", worst < 1e-9,
           f"worst infinity-norm gap {worst:.2e} over 1e5 draws (tol 1e-9)", t0)


def test_criterion_04_robust_condition():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    worst = -np.inf
    for _ in range(100_000):
        n = 4
        e1 = rng.normal(size=n)
        e1_dot = rng.normal(size=n)
        k1 = rng.uniform(0.1, 4.0, n)
        errs = ErrorSignals(e1=e1, e1_dot=e1_dot, e2=e1_dot + k1 * e1,
                            alpha=-k1 * e1)
        if rng.random() < 0.5:
            cfg = RobustTermConfig(mode="nonlinear",
                                   epsilon=rng.uniform(0.01, 2.0))
            u_r = robust_term(errs, rng.uniform(0.0, 20.0), cfg)
        else:
            cfg = RobustTermConfig(mode="constant", k20=rng.uniform(0.0, 5.0))
            u_r = robust_term(errs, 0.0, cfg)
        worst = max(worst, float(errs.e2 @ u_r))
    report("criterion 4 robust-term sign condition", worst <= 0.0,
           f"max e2.u_r = {worst:.2e} over 1e5 draws in both modes (must be <= 0)",
           t0)


def test_criterion_05_projection_safety():
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    # 200 independent adaptation sequences stepped 5000 times = 1e6 axis-steps
    axes, steps = 200, 5000
    lo = -rng.uniform(0.1, 3.0, axes)
    hi = rng.uniform(0.1, 3.0, axes)
    x = rng.uniform(lo, hi)
    ok = True
    for _ in range(steps):
        drive = rng.normal(scale=30.0, size=axes)
        dt = rng.uniform(0.001, 0.05)
        x = advance_bounded_estimate(x, drive, lo, hi, dt)
        if np.any(x < lo) or np.any(x > hi):
            ok = False
            break
    # theta projection through the estimator: 2e5 biased updates
    bounds = [Bounds1D(-0.05, 0.05), Bounds1D(-0.03, 0.08)]
    lo_t = np.array([b.lo for b in bounds])
    hi_t = np.array([b.hi for b in bounds])
    state = RlsState.initial(2, p0=10.0, lam=0.99)
    for k in range(200_000):
        phi = rng.normal(size=2) * 5.0
        state = rls_update(state, phi, rng.normal() + 2.0, bounds)
        if np.any(state.theta_hat < lo_t) or np.any(state.theta_hat > hi_t):
            ok = False
            break
    report("criterion 5 projection safety", ok,
           "1e6 bounded-adaptation steps + 2e5 estimator updates stayed in bounds",
           t0)


def test_criterion_06_lyapunov_decrease():
    t0 = time.perf_counter()
    model = SystemModel(
        n=1, l=1,
        f=lambda X1, X2: np.zeros(1),
        phi=lambda X1, X2: np.zeros((1, 1)),
        g_hat=lambda t: np.eye(1),
        theta_bounds=[Bounds1D(0.0, 0.0)],
        g_bounds=(np.eye(1), np.eye(1)),
        delta_bar=0.0,
    )
    gains = BacksteppingGains([1.0], [1.0], [0.4])
    robust = RobustTermConfig(mode="constant", k20=0.0)

    def closed_loop(t, y):
        X1, X2, d_hat = y[0:1], y[1:2], y[2:3]
        errs = error_signals(X1, X2, np.zeros(1), np.zeros(1), gains.k1)
        state = ControllerState(d_c_hat=d_hat, e1_integral=np.zeros(1),
                                e1_dot_filtered=np.zeros(1),
                                u_prev=np.zeros(1), d_bar=10.0)
        U, _ = control_arc(model, X1, X2, errs, -gains.k1 * errs.e1_dot,
                           np.zeros(1), state, gains, robust, dt=0.0)
        return np.array([X2[0], U[0], 0.4 * errs.e2[0]])

    def V2(y):
        e2 = y[1] + y[0]
        return 0.5 * y[0] ** 2 + 0.5 * e2 ** 2 + 0.5 * y[2] ** 2 / 0.4

    dt = 1e-3
    y = np.array([1.0, 0.0, 0.0])
    v_prev = V2(y)
    worst = -np.inf
    for k in range(5000):
        y = rk4_step(closed_loop, k * dt, y, dt)
        v = V2(y)
        worst = max(worst, v - v_prev)
        v_prev = v
    report("criterion 6 Lyapunov decrease", worst <= 1e-6,
           f"max per-step increase {worst:.2e} over 5 s at dt=1 ms (tol 1e-6)",
           t0)


def test_criterion_07_quadrotor_inversion_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(105)
    p = QuadrotorParams()
    worst_u = 0.0
    worst_mix = 0.0
    for _ in range(10_000):
        u = np.array([rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0),
                      rng.uniform(0.5, 30.0)])
        yaw = rng.uniform(-math.pi, math.pi)
        F, e1, e2 = thrust_and_attitude_from_u(u, yaw)
        worst_u = max(worst_u,
                      float(np.max(np.abs(world_force([e1, e2, yaw], F) - u))))
        F_t = rng.uniform(10.0, 50.0)
        tau = np.array([rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                        rng.uniform(-0.15, 0.15)])
        w, sat = rotor_speeds_sq_from_wrench(F_t, tau, p)
        assert not sat
        F2, tau2 = wrench_from_rotor_speeds_sq(w, p)
        worst_mix = max(worst_mix, abs(F2 - F_t),
                        float(np.max(np.abs(tau2 - tau))))
    ok = worst_u < 1e-9 and worst_mix < 1e-10
    report("criterion 7 quadrotor inversion identities", ok,
           f"thrust/attitude gap {worst_u:.2e} (tol 1e-9), "
           f"mixing gap {worst_mix:.2e} (tol 1e-10), 1e4 draws each", t0)


def test_criterion_08a_figure_eight_magnitude():
    t0 = time.perf_counter()
    m, _ = simulate(figure_eight_scenario(), baseline_gains())
    mae_cm = m.mae[:3] * 100.0
    ok = m.fault is None and np.all(mae_cm < 15.0)
    report("criterion 8a figure-eight error magnitude", ok,
           f"MAE [x y z] = [{mae_cm[0]:.2f} {mae_cm[1]:.2f} {mae_cm[2]:.2f}] cm "
           f"(each < 15 cm), fault={m.fault!r}", t0)


def test_criterion_08b_fine_tuning_improvement():
    t0 = time.perf_counter()
    base, _ = simulate(figure_eight_scenario(), baseline_gains())
    tuned, _ = simulate(figure_eight_scenario(), fine_tuned_gains())
    red_x = 1.0 - tuned.mae[0] / base.mae[0]
    red_y = 1.0 - tuned.mae[1] / base.mae[1]
    ok = (base.fault is None and tuned.fault is None
          and red_x >= 0.15 and red_y >= 0.15)
    report("criterion 8b fine-tuning improvement", ok,
           f"MAE reduction x {red_x * 100.0:.1f}%, y {red_y * 100.0:.1f}% "
           "(>= 15% required)", t0)


def test_criterion_08c_payload_drop_recovery():
    t0 = time.perf_counter()
    sc = payload_drop_trajectory()
    m, tel = simulate(sc, payload_drop_gains())
    t = tel.column("t")
    ez = np.abs(tel.column("err_z"))
    detach = sc.payload.detach_time
    window = ez[(t >= detach + 5.0) & (t <= sc.duration - 1.0)]
    worst = float(window.max())
    ok = m.fault is None and worst < 0.05
    report("criterion 8c payload-drop recovery", ok,
           f"|z error| beyond detach+5 s peaks at {worst * 100.0:.2f} cm "
           "(< 5 cm required)", t0)


def test_criterion_09_rls_matches_batch_least_squares():
    t0 = time.perf_counter()
    rng = np.random.default_rng(106)
    l = 2
    theta_true = np.array([0.05, -0.02])
    bounds = [Bounds1D(-1.0, 1.0)] * l
    phis = [rng.normal(size=l) for _ in range(200)]
    ys = [p @ theta_true for p in phis]

    # prior-inclusive normal equations (the exact cost RLS minimizes)
    state = RlsState.initial(l, p0=10.0, lam=1.0)
    for phi, y in zip(phis, ys):
        state = rls_update(state, phi, y - phi @ state.theta_hat, bounds)
    G = np.eye(l) / 10.0 + sum(np.outer(p, p) for p in phis)
    b = sum(p * y for p, y in zip(phis, ys))
    gap_prior = float(np.max(np.abs(state.theta_hat - np.linalg.solve(G, b))))

    # diffuse prior against the plain normal equations
    state2 = RlsState.initial(l, p0=1e6, lam=1.0)
    for phi, y in zip(phis, ys):
        state2 = rls_update(state2, phi, y - phi @ state2.theta_hat, bounds)
    A = np.stack(phis)
    plain = np.linalg.lstsq(A, np.array(ys), rcond=None)[0]
    gap_plain = float(np.max(np.abs(state2.theta_hat - plain)))

    ok = gap_prior < 1e-8 and gap_plain < 1e-8
    report("criterion 9 RLS batch equivalence", ok,
           f"gap vs regularized normal equations {gap_prior:.2e}, "
           f"vs plain least squares (diffuse prior) {gap_plain:.2e} (tol 1e-8)",
           t0)


def test_criterion_10_rk4_order():
    t0 = time.perf_counter()

    def err_exp(dt):
        y, t = np.array([1.0]), 0.0
        while t < 1.0 - 1e-12:
            y = rk4_step(lambda tt, yy: -yy, t, y, dt)
            t += dt
        return abs(y[0] - math.exp(-1.0))

    # falling arc with quadratic drag: v' = -g + c v^2 (v <= 0), closed form
    # v = -vt tanh(g t / vt), z = z0 - (vt^2/g) ln cosh(g t / vt)
    g0, c = 9.81, 0.5
    vt = math.sqrt(g0 / c)

    def err_drag(dt):
        y, t = np.array([10.0, 0.0]), 0.0
        while t < 1.0 - 1e-12:
            y = rk4_step(lambda tt, yy: np.array([yy[1], -g0 + c * yy[1] ** 2]),
                         t, y, dt)
            t += dt
        z_exact = 10.0 - vt * vt / g0 * math.log(math.cosh(g0 * 1.0 / vt))
        v_exact = -vt * math.tanh(g0 * 1.0 / vt)
        return max(abs(y[0] - z_exact), abs(y[1] - v_exact))

    ratios = [err_exp(0.1) / err_exp(0.05), err_exp(0.05) / err_exp(0.025),
              err_drag(0.02) / err_drag(0.01), err_drag(0.01) / err_drag(0.005)]
    ok = all(12.0 < r < 20.0 for r in ratios)
    report("criterion 10 RK4 order", ok,
           "error ratios per dt halving " +
           str([f"{r:.1f}" for r in ratios]) + " (all in [12, 20])", t0)
