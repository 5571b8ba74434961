"""Tests for the finite-time differentiator nonlinearities and noise-gap oracle."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from ffts_eso.differentiator import (
    DifferentiatorGains,
    DiffState,
    differentiator_rhs,
    noise_gap_argmax_oracle,
    noise_gap_bounds,
    noise_gap_function,
    phi1,
    phi1_jacobian,
    phi1_jacobian_eigen_bounds,
    phi2,
    power_norm2,
)
from ffts_eso.errors import DomainError, ZeroVectorError
from ffts_eso.sim.integrator import heun_step
from ffts_eso.stability import solve_lyapunov_2x2


def _random_e(rng, n=3):
    return rng.normal(size=n) * 10.0 ** rng.uniform(-3.0, 2.0)


def _log_spaced(rng, count, n=3):
    """Random directions with norms log-spaced over [1e-6, 1e3]."""
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * np.logspace(-6.0, 3.0, count)[:, None]


class TestGains:
    """DifferentiatorGains validation."""

    def test_exponents(self, channel):
        """c1 = (1-p)/(3p-2) and beta = (p-1)/(3p-2)."""
        assert channel.c1 == pytest.approx(-0.2 / 1.6)
        assert channel.beta == pytest.approx(0.2 / 1.6)

    @pytest.mark.parametrize("p", [1.0, 2.0, 0.5])
    def test_exponent_outside_open_interval(self, p):
        """p must lie strictly between 1 and 2."""
        with pytest.raises(ValueError, match="p must lie"):
            DifferentiatorGains(3.0, 2.0, 6.0, p)

    def test_nonpositive_gain(self):
        """Every gain must be positive."""
        with pytest.raises(ValueError, match="k2 must be positive"):
            DifferentiatorGains(3.0, 0.0, 6.0, 1.2)

    def test_non_hurwitz_gain_matrix(self, monkeypatch):
        """A gain matrix with an eigenvalue off the open left half-plane is rejected."""
        unstable = np.array([[0.5, 1.0], [0.0, -1.0]])
        monkeypatch.setattr(DifferentiatorGains, "gain_matrix", property(lambda self: unstable))
        with pytest.raises(ValueError, match="must be Hurwitz"):
            DifferentiatorGains(3.0, 2.0, 6.0, 1.2)


class TestNonlinearities:
    """phi1, phi2 and the phi1 Jacobian."""

    def test_zero_at_origin(self, channel):
        """phi1(0) = phi2(0) = 0 without overflow."""
        assert_allclose(phi1(np.zeros(3), channel), np.zeros(3))
        assert_allclose(phi2(np.zeros(3), channel), np.zeros(3))

    def test_phi1_closed_form(self, channel, rng):
        """phi1(e) = k3 e + |e|^(2 c1) e."""
        for _ in range(50):
            e = _random_e(rng)
            expected = 6.0 * e + np.linalg.norm(e) ** (2.0 * channel.c1) * e
            assert_allclose(phi1(e, channel), expected, rtol=1e-12)

    @pytest.mark.parametrize("p", [1.1, 1.2, 1.5, 1.9])
    @pytest.mark.parametrize("k3", [1.0, 6.0])
    def test_phi2_is_jacobian_times_phi1(self, rng, p, k3):
        """phi2(e) = phi1'(e) phi1(e) for 10^3 norms log-spaced over [1e-6, 1e3]."""
        g = DifferentiatorGains(3.0, 2.0, k3, p)
        for e in _log_spaced(rng, 1000):
            lhs = phi2(e, g)
            gap = np.linalg.norm(lhs - phi1_jacobian(e, g) @ phi1(e, g))
            assert gap <= 1e-9 * (1.0 + np.linalg.norm(lhs))

    @pytest.mark.parametrize("p", [1.1, 1.2, 1.5, 1.9])
    def test_odd(self, rng, p):
        """phi1 and phi2 are odd."""
        g = DifferentiatorGains(3.0, 2.0, 6.0, p)
        for e in _log_spaced(rng, 200):
            assert_array_equal(phi1(-e, g), -phi1(e, g))
            assert_array_equal(phi2(-e, g), -phi2(e, g))

    @pytest.mark.parametrize("p", [1.1, 1.2, 1.5, 1.9])
    def test_phi1_holder_bound(self, rng, p):
        """|phi1(e)| <= k3 |e| + |e|^(p/(3p-2))."""
        g = DifferentiatorGains(3.0, 2.0, 6.0, p)
        for e in _log_spaced(rng, 1000):
            r = np.linalg.norm(e)
            bound = g.k3 * r + r ** (p / (3.0 * p - 2.0))
            assert np.linalg.norm(phi1(e, g)) <= bound * (1.0 + 1e-12)

    @pytest.mark.parametrize("p", [1.1, 1.2, 1.5, 1.9])
    def test_power_sum_inequality(self, rng, p):
        """x^(1/p) + y^(1/p) >= (x + y)^(1/p), strictly when x, y > 0."""
        x = 10.0 ** rng.uniform(-6.0, 3.0, size=1000)
        y = 10.0 ** rng.uniform(-6.0, 3.0, size=1000)
        lhs = x ** (1.0 / p) + y ** (1.0 / p)
        rhs = (x + y) ** (1.0 / p)
        assert np.all(lhs > rhs)
        assert_array_equal(0.0 ** (1.0 / p) + y ** (1.0 / p), (0.0 + y) ** (1.0 / p))

    def test_jacobian_matches_finite_difference(self, channel, rng):
        """Central differences reproduce the analytic Jacobian."""
        for _ in range(20):
            e = rng.normal(size=3)
            J = phi1_jacobian(e, channel)
            h = 1e-6
            fd = np.column_stack(
                [
                    (phi1(e + h * d, channel) - phi1(e - h * d, channel)) / (2.0 * h)
                    for d in np.eye(3)
                ]
            )
            assert_allclose(J, fd, rtol=1e-6, atol=1e-8)

    def test_jacobian_is_spd_with_closed_form_bounds(self, rng):
        """Eigenvalues of phi1' match the closed-form extremes."""
        for p in (1.1, 1.2, 1.5, 1.9):
            g = DifferentiatorGains(3.0, 2.0, 6.0, p)
            for e in _log_spaced(rng, 1000):
                J = phi1_jacobian(e, g)
                assert_allclose(J, J.T)
                eigs = np.linalg.eigvalsh(J)
                lo, hi = phi1_jacobian_eigen_bounds(e, g)
                assert eigs[0] > 0.0
                assert eigs[0] == pytest.approx(lo, rel=1e-9)
                assert eigs[-1] == pytest.approx(hi, rel=1e-9)

    def test_jacobian_at_origin(self, channel):
        """The Jacobian is undefined at e = 0."""
        with pytest.raises(ZeroVectorError):
            phi1_jacobian(np.zeros(3), channel)

    def test_power_norm2_floor(self):
        """Negative powers of zero stay finite."""
        assert np.isfinite(power_norm2(0.0, -0.125))
        assert power_norm2(4.0, 0.5) == pytest.approx(2.0)

    def test_one_dimensional(self):
        """Every nonlinearity works for n = 1."""
        g = DifferentiatorGains(3.0, 2.0, 6.0, 1.2)
        e = np.array([-0.3])
        assert_allclose(phi2(e, g), phi1_jacobian(e, g) @ phi1(e, g), rtol=1e-12)


class TestDynamics:
    """Error dynamics and convergence."""

    def test_origin_is_equilibrium(self, channel):
        """Zero state, no perturbation: zero derivative."""
        d = differentiator_rhs(DiffState(np.zeros(3), np.zeros(3)), channel)
        assert_allclose(d.to_array(), np.zeros(6))

    def test_perturbations_add(self, channel, rng):
        """delta1 and delta2 enter additively."""
        s = DiffState(rng.normal(size=3), rng.normal(size=3))
        d1, d2 = rng.normal(size=3), rng.normal(size=3)
        base = differentiator_rhs(s, channel)
        pert = differentiator_rhs(s, channel, delta1=d1, delta2=d2)
        assert_allclose(pert.e1 - base.e1, d1, atol=1e-12)
        assert_allclose(pert.e2 - base.e2, d2, atol=1e-12)

    def test_noise_enters_nonlinearities(self, channel, rng):
        """Noise shifts e1 inside phi1 and phi2 only."""
        s = DiffState(rng.normal(size=3), rng.normal(size=3))
        mu = rng.normal(size=3)
        noisy = differentiator_rhs(s, channel, noise=mu)
        assert_allclose(noisy.e1, -3.0 * phi1(s.e1 + mu, channel) + s.e2)
        assert_allclose(noisy.e2, -2.0 * phi2(s.e1 + mu, channel))

    def test_state_shape_mismatch(self):
        """e1 and e2 must have the same length."""
        with pytest.raises(ValueError, match="equal length"):
            DiffState(np.zeros(3), np.zeros(2))

    @pytest.mark.slow
    def test_converges_before_settling_bound(self, channel, rng):
        """From 100 unit-ball states the norm reaches 1e-6 before the certificate's bound."""
        cert = solve_lyapunov_2x2(channel)
        h = 1e-3

        def rhs(t, x):
            return differentiator_rhs(DiffState.from_array(x), channel).to_array()

        for _ in range(100):
            x = rng.normal(size=6)
            x *= rng.uniform(0.05, 1.0) / np.linalg.norm(x)
            s0 = DiffState.from_array(x)
            bound = cert.settling_time(cert.quadratic(*s0.zeta(channel)))

            t = 0.0
            while np.linalg.norm(x) > 1e-6:
                x = heun_step(rhs, x, t, h)
                t += h
                assert t < bound, f"not converged within {bound:.3f} s"


class TestNoiseGap:
    """Noise-gap bounds and the argmax oracle."""

    def test_bounds_dominate_sampled_gaps(self, rng):
        """|phi_i(e) - phi_i(e + mu)| never exceeds the closed-form bound."""
        for p in (1.1, 1.2, 1.5, 1.9):
            g = DifferentiatorGains(3.0, 2.0, 6.0, p)
            for _ in range(2500):
                mu_bar = 10.0 ** rng.uniform(-4.0, 0.0)
                mu = rng.normal(size=3)
                mu *= rng.uniform(0.0, mu_bar) / np.linalg.norm(mu)
                e = rng.normal(size=3) * 10.0 ** rng.uniform(-4.0, 1.0)
                b1, b2 = noise_gap_bounds(mu_bar, g)
                assert np.linalg.norm(phi1(e, g) - phi1(e + mu, g)) <= b1 * (1.0 + 1e-9)
                assert np.linalg.norm(phi2(e, g) - phi2(e + mu, g)) <= b2 * (1.0 + 1e-9)

    def test_bounds_vanish_without_noise(self, channel):
        """mu_bar = 0 gives zero bounds; negative mu_bar is rejected."""
        assert noise_gap_bounds(0.0, channel) == (0.0, 0.0)
        with pytest.raises(DomainError):
            noise_gap_bounds(-1.0, channel)

    def test_gap_at_minus_half_mu(self):
        """At x = -mu/2 the gap is 2^(4a) |mu|^(2 - 4a)."""
        mu = np.array([0.4, -0.2, 0.1])
        alpha = 0.3
        expected = 2.0 ** (4.0 * alpha) * np.linalg.norm(mu) ** (2.0 - 4.0 * alpha)
        assert noise_gap_function(-0.5 * mu, mu, alpha) == pytest.approx(expected)

    def test_gap_domain(self):
        """x = 0, x = -mu and alpha outside (0, 1/2) are rejected."""
        mu = np.array([1.0, 0.0, 0.0])
        with pytest.raises(DomainError):
            noise_gap_function(np.zeros(3), mu, 0.3)
        with pytest.raises(DomainError):
            noise_gap_function(-mu, mu, 0.3)
        with pytest.raises(DomainError):
            noise_gap_function(mu, mu, 0.5)

    def test_oracle_unit_mu(self):
        """mu = e1, alpha = 0.3: the maximizer is within 2e-3 of [-0.5, 0, 0]."""
        x = noise_gap_argmax_oracle(np.array([1.0, 0.0, 0.0]), 0.3, step=1e-3)
        assert np.linalg.norm(x - np.array([-0.5, 0.0, 0.0])) <= 2e-3

    def test_oracle_random_pairs(self, rng):
        """For random (mu, alpha) the maximizer lands within two grid steps of -mu/2."""
        step = 2e-3
        for _ in range(20):
            mu = rng.uniform(-1.0, 1.0, size=int(rng.integers(1, 5)))
            alpha = float(rng.uniform(0.02, 0.48))
            x = noise_gap_argmax_oracle(mu, alpha, step=step)
            assert np.linalg.norm(x + 0.5 * mu) <= 2.0 * step * np.sqrt(2.0) * np.linalg.norm(mu)

    def test_oracle_error_halves_with_step(self):
        """With an offset grid the location error scales with the step."""
        mu = np.array([0.3, -0.4, 0.2])
        errors = []
        for step in (4e-3, 2e-3):
            x = noise_gap_argmax_oracle(mu, 0.25, step=step, offset=0.25)
            errors.append(np.linalg.norm(x + 0.5 * mu))
        assert errors[1] / errors[0] == pytest.approx(0.5, abs=0.05)

    def test_oracle_rejects_zero_mu(self):
        """mu = 0 has no maximizer."""
        with pytest.raises(DomainError, match="nonzero"):
            noise_gap_argmax_oracle(np.zeros(3), 0.3)
