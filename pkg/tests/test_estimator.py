import numpy as np
import pytest

from pidstep.core import Bounds1D, ContractViolation
from pidstep.estimator import (
    CovarianceLostDefiniteness,
    RlsState,
    rls_update,
)


def run_rls(state, regressors, observations, bounds):
    """Feed (phi, y) pairs, passing the prediction error as the residual."""
    for phi, y in zip(regressors, observations):
        innovation = y - phi @ state.theta_hat
        state = rls_update(state, phi, innovation, bounds)
    return state


class TestRlsUpdate:
    def test_no_excitation_scales_covariance(self):
        state = RlsState.initial(2, p0=3.0, lam=0.9)
        out = rls_update(state, np.zeros(2), 1.0, Bounds1D(-1.0, 1.0))
        assert np.array_equal(out.theta_hat, state.theta_hat)
        assert np.allclose(out.P, state.P / 0.9, atol=1e-14)

    def test_scalar_convergence_to_truth(self):
        # noise-free y = theta phi with theta = 0.05; the estimate lands
        # within 1e-4 of the truth after 100 informative samples (the
        # initial-covariance prior accounts for the residual gap)
        rng = np.random.default_rng(21)
        theta_true = 0.05
        state = RlsState.initial(1, p0=10.0, lam=1.0)
        bounds = Bounds1D(-1.0, 1.0)
        phis, ys = [], []
        for _ in range(100):
            phi = np.array([rng.uniform(0.5, 1.5)])
            phis.append(phi)
            ys.append(theta_true * phi[0])
        state = run_rls(state, phis, ys, bounds)
        assert abs(state.theta_hat[0] - theta_true) < 1e-4

        # oracle: normal equations of the same regularized cost
        G = 0.1 * np.eye(1) + sum(np.outer(p, p) for p in phis)
        b = sum(p * y for p, y in zip(phis, ys))
        theta_batch = np.linalg.solve(G, b)
        assert abs(state.theta_hat[0] - theta_batch[0]) < 1e-10

    def test_biased_residuals_clamp_at_bound(self):
        state = RlsState.initial(1, p0=10.0, lam=0.95)
        bounds = Bounds1D(-0.1, 0.1)
        for _ in range(500):
            innovation = 1.0 - state.theta_hat[0]  # pulls hard toward +1
            state = rls_update(state, np.ones(1), innovation, bounds)
            assert -0.1 <= state.theta_hat[0] <= 0.1
        assert state.theta_hat[0] == pytest.approx(0.1, abs=1e-12)

    def test_covariance_stays_symmetric(self):
        rng = np.random.default_rng(22)
        state = RlsState.initial(3, p0=5.0, lam=0.98)
        bounds = Bounds1D(-10.0, 10.0)
        for _ in range(300):
            state = rls_update(state, rng.normal(size=3), rng.normal(),
                               bounds)
            assert np.max(np.abs(state.P - state.P.T)) < 1e-12

    def test_definiteness_loss_signals_reset(self):
        state = RlsState(theta_hat=np.zeros(2), P=np.zeros((2, 2)), lam=1.0)
        with pytest.raises(CovarianceLostDefiniteness):
            rls_update(state, np.ones(2), 1.0, Bounds1D(-1.0, 1.0))

    def test_bad_forgetting_factor(self):
        state = RlsState.initial(1, lam=0.0)
        with pytest.raises(ContractViolation):
            rls_update(state, np.ones(1), 0.0, Bounds1D(-1.0, 1.0))

    def test_regressor_length_checked(self):
        state = RlsState.initial(2)
        with pytest.raises(ContractViolation):
            rls_update(state, np.ones(3), 0.0, Bounds1D(-1.0, 1.0))


class TestBatchEquivalence:
    def test_matches_regularized_normal_equations(self):
        # lam = 1 RLS solves min ||y - phi theta||^2 + (theta - theta0)' P0^-1
        # (theta - theta0); the recursion must match that solution closely
        rng = np.random.default_rng(23)
        l = 2
        theta_true = np.array([0.05, -0.02])
        state = RlsState.initial(l, p0=10.0, lam=1.0)
        bounds = Bounds1D(-1.0, 1.0)
        phis = [rng.normal(size=l) for _ in range(200)]
        ys = [p @ theta_true for p in phis]
        state = run_rls(state, phis, ys, bounds)
        G = np.eye(l) / 10.0 + sum(np.outer(p, p) for p in phis)
        b = sum(p * y for p, y in zip(phis, ys))
        theta_batch = np.linalg.solve(G, b)
        assert np.max(np.abs(state.theta_hat - theta_batch)) < 1e-8
