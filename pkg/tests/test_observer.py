"""Tests for the translational and rotational extended state observers."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ffts_eso.errors import InvalidGainsError
from ffts_eso.geometry import CRITICAL_SET, MorseWeights, exp_so3, hat, principal_angle, s_K
from ffts_eso.models import RotationalGainsConfig, TranslationalGainsConfig
from ffts_eso.observer import (
    EsoErrors,
    RotationalEsoGains,
    RotationalEsoState,
    TranslationalEsoGains,
    TranslationalEsoState,
    e_w,
    gain_report_a,
    gain_report_t,
    h_term,
    lyapunov_monitor_a,
    lyapunov_monitor_rows,
    lyapunov_monitor_t,
    psi_a,
    psi_t,
    rotational_error_rhs,
    rotational_eso_rhs,
    translational_error_rhs,
    translational_eso_rhs,
    validate_gains_a,
    validate_gains_t,
)
from ffts_eso.plant import rigid_body_rates
from ffts_eso.sim.integrator import heun_step

K = MorseWeights(3.0, 2.0, 1.0)
ZERO = np.zeros(3)


def _unit_ball(rng, n):
    x = rng.normal(size=n)
    return x * rng.uniform(0.2, 1.0) / np.linalg.norm(x)


def _errors_t(e_b, e_v, e_phi):
    return EsoErrors(e_b, e_v, e_phi, np.eye(3), ZERO, ZERO)


def _errors_a(E_R, e_Omega, e_tau):
    return EsoErrors(ZERO, ZERO, ZERO, E_R, e_Omega, e_tau)


class TestSlidingVariables:
    """psi_t, psi_a and e_w."""

    def test_psi_t_at_origin(self, gains_t):
        """(0, 0) maps to 0."""
        assert_allclose(psi_t(ZERO, ZERO, gains_t), ZERO)

    def test_psi_t_on_unit_sphere(self, gains_t):
        """The power factor is 1 on the unit sphere: psi = 2 kappa e_b."""
        e = np.array([0.0, 0.6, 0.8])
        assert_allclose(psi_t(e, ZERO, gains_t), 1.6 * e)

    def test_psi_t_scalar_evaluation(self, gains_t):
        """e_b = 0.1 e1, e_v = e2."""
        got = psi_t(np.array([0.1, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]), gains_t)
        assert_allclose(got, [0.8 * (0.1 + 0.1 ** (2.0 / 3.0)), 1.0, 0.0])

    def test_psi_a_mirrors_psi_t(self, gains_r, rng):
        """Same formula with kappa_a."""
        assert_allclose(psi_a(np.array([1.0, 0.0, 0.0]), ZERO, gains_r), [1.2, 0.0, 0.0])
        tg = TranslationalEsoGains(3.0, 2.0, 6.0, 0.6, 1.2)
        x, y = rng.normal(size=3), rng.normal(size=3)
        assert_allclose(psi_a(x, y, gains_r), psi_t(x, y, tg))

    def test_e_w_examples(self):
        """e_w vanishes with e_Omega and equals (0, 0, K1 + K2) for E_R = I, e_Omega = e3."""
        assert_allclose(e_w(exp_so3(np.array([0.3, 0.1, 0.2])), ZERO, K), ZERO)
        assert_allclose(e_w(np.eye(3), np.array([0.0, 0.0, 1.0]), K), [0.0, 0.0, 5.0])

    def test_e_w_matches_definition(self, random_rotation, rng):
        """e_w = sum_i K_i e_i x (e_Omega x E_R^T e_i)."""
        for _ in range(20):
            E_R, eO = random_rotation(), rng.normal(size=3)
            expected = sum(
                k * np.cross(e, np.cross(eO, E_R.T @ e)) for k, e in zip(K.diag, np.eye(3))
            )
            assert_allclose(e_w(E_R, eO, K), expected, atol=1e-13)

    def test_e_w_is_rate_of_s_K(self, random_rotation, rng):
        """Central differences of s_K along E_R' = E_R e_Omega^ reproduce e_w."""
        h = 1e-5
        for _ in range(20):
            E_R, eO = random_rotation(), rng.normal(size=3)
            fd = (s_K(E_R @ exp_so3(h * eO), K) - s_K(E_R @ exp_so3(-h * eO), K)) / (2.0 * h)
            assert_allclose(fd, e_w(E_R, eO, K), atol=1e-8)

    def test_h_term_guard(self):
        """Below 1e-9 the singular factor is dropped."""
        y = np.array([0.3, -0.2, 0.1])
        assert_allclose(h_term(np.full(3, 1e-12), y, 1.2), y)
        x = np.array([0.5, 0.0, 0.0])
        expected = 0.25 ** (-1.0 / 6.0) * (np.eye(3) - (2.0 / 6.0 / 0.25) * np.outer(x, x)) @ y + y
        assert_allclose(h_term(x, y, 1.2), expected)


class TestObserverDynamics:
    """Observer right-hand sides against the plant."""

    def test_translational_hover_balance(self, gains_t, body):
        """Zero errors, f = m g, R = I: v_hat and phi_hat stay constant."""
        est = TranslationalEsoState(np.array([0.0, 0.0, -3.0]), ZERO, ZERO)
        d = translational_eso_rhs(
            est, est.b_hat, est.v_hat, np.eye(3), body.mass * body.grav, gains_t, body.mass,
            body.grav,
        )
        assert_allclose(d.v_hat, ZERO, atol=1e-12)
        assert_allclose(d.phi_hat, ZERO)

    def test_rotational_equilibrium_reproduces_plant(self, gains_r, body, rng):
        """Perfect estimates give Omega_hat' equal to the true body acceleration."""
        # exact quarter turn so that R_hat^T R is exactly I
        R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        Omega = rng.normal(size=3)
        tau, tau_D = rng.normal(size=3), rng.normal(size=3)
        est = RotationalEsoState(R.copy(), Omega.copy(), tau_D.copy())
        d = rotational_eso_rhs(est, R, Omega, tau, gains_r, body.J)
        truth = rigid_body_rates(R, ZERO, Omega, 0.0, tau, ZERO, tau_D, body)
        assert_allclose(d.Omega_hat, truth.Omega_dot, rtol=1e-12, atol=1e-12)
        assert_allclose(d.tau_hat, ZERO)
        assert_allclose(d.R_hat, truth.R_dot, atol=1e-14)

    def test_translational_error_dynamics(self, gains_t, body, random_rotation, rng):
        """Truth minus observer derivative equals the closed error dynamics."""
        for _ in range(20):
            b, v = rng.normal(size=3), rng.normal(size=3)
            R, f = random_rotation(), float(rng.uniform(20.0, 60.0))
            phi_D = 5.0 * rng.normal(size=3)
            est = TranslationalEsoState(
                b - 0.5 * rng.normal(size=3), v - rng.normal(size=3), phi_D - rng.normal(size=3)
            )
            truth = rigid_body_rates(R, v, ZERO, f, ZERO, phi_D, ZERO, body)
            obs = translational_eso_rhs(est, b, v, R, f, gains_t, body.mass, body.grav)
            e_b, e_v, e_phi = b - est.b_hat, v - est.v_hat, phi_D - est.phi_hat
            de_b, de_v, de_phi = translational_error_rhs(e_b, e_v, e_phi, gains_t, body.mass)
            assert_allclose(truth.b_dot - obs.b_hat, de_b, atol=1e-10)
            assert_allclose(truth.v_dot - obs.v_hat, de_v, atol=1e-10)
            assert_allclose(-obs.phi_hat, de_phi, atol=1e-10)

    def test_rotational_error_dynamics(self, gains_r, body, random_rotation, rng):
        """E_R', e_Omega', e_tau' from truth and observer match the closed form."""
        for _ in range(20):
            R, Omega = random_rotation(), rng.normal(size=3)
            tau, tau_D = rng.normal(size=3), 0.2 * rng.normal(size=3)
            est = RotationalEsoState(
                R @ exp_so3(0.5 * rng.normal(size=3)).T,
                Omega + rng.normal(size=3),
                tau_D - 0.1 * rng.normal(size=3),
            )
            truth = rigid_body_rates(R, ZERO, Omega, 0.0, tau, ZERO, tau_D, body)
            obs = rotational_eso_rhs(est, R, Omega, tau, gains_r, body.J, body.J_inv)

            errors = EsoErrors.compute(ZERO, ZERO, R, Omega, ZERO, tau_D,
                                       TranslationalEsoState(ZERO, ZERO, ZERO), est)
            E_R_dot = obs.R_hat.T @ R + est.R_hat.T @ truth.R_dot
            eO_dot = truth.Omega_dot - E_R_dot.T @ est.Omega_hat - errors.E_R.T @ obs.Omega_hat

            dE, deO, detau = rotational_error_rhs(
                errors.E_R, errors.e_Omega, errors.e_tau, gains_r, body.J
            )
            assert_allclose(E_R_dot, dE, atol=1e-10)
            assert_allclose(eO_dot, deO, atol=1e-10)
            assert_allclose(-obs.tau_hat, detau, atol=1e-10)

    def test_error_equilibrium(self, gains_t, gains_r, body):
        """Zero errors have zero error derivatives."""
        for d in translational_error_rhs(ZERO, ZERO, ZERO, gains_t, body.mass):
            assert_allclose(d, ZERO)
        dE, deO, detau = rotational_error_rhs(np.eye(3), ZERO, ZERO, gains_r, body.J)
        assert_allclose(dE, np.zeros((3, 3)))
        assert_allclose(deO, ZERO)
        assert_allclose(detau, ZERO)

    def test_non_identity_critical_points_are_stationary(self, gains_r, body):
        """E_R at a half turn with zero rate and torque errors does not move."""
        for E_R in CRITICAL_SET[1:]:
            dE, deO, detau = rotational_error_rhs(E_R, ZERO, ZERO, gains_r, body.J)
            assert_allclose(dE, np.zeros((3, 3)))
            assert_allclose(deO, ZERO)
            assert_allclose(detau, ZERO)

    def test_translation_equivariance(self, gains_t, body, rng):
        """Shifting truth and estimate by a constant leaves the derivatives unchanged."""
        est = TranslationalEsoState(rng.normal(size=3), rng.normal(size=3), rng.normal(size=3))
        b, v = rng.normal(size=3), rng.normal(size=3)
        shift = np.array([8.0, -4.0, 2.0])
        moved = TranslationalEsoState(est.b_hat + shift, est.v_hat, est.phi_hat)
        d0 = translational_eso_rhs(est, b, v, np.eye(3), 40.0, gains_t, body.mass, body.grav)
        d1 = translational_eso_rhs(moved, b + shift, v, np.eye(3), 40.0, gains_t, body.mass,
                                   body.grav)
        assert_allclose(d1.to_array(), d0.to_array(), atol=1e-12)


class TestGainValidation:
    """Certificates and gain windows."""

    def test_default_translational_gains(self, gains_t):
        """k = (3, 2, 6), kappa = 0.8, p = 1.2 with mu at half its bound."""
        report = validate_gains_t(gains_t)
        assert report.is_valid
        assert gains_t.mu_bound == pytest.approx(31.5, abs=0.05)
        assert gains_t.mu_t == pytest.approx(0.5 * gains_t.mu_bound)
        assert report.Gamma1 == pytest.approx(0.6)
        assert report.Gamma2 == pytest.approx(0.435, abs=1e-3)

    def test_default_rotational_gains(self, gains_r):
        """k = (3, 2, 4), kappa = 0.6, p = 1.2."""
        report = validate_gains_a(gains_r)
        assert report.is_valid
        assert gains_r.certificate.gamma1 == pytest.approx(3.056, abs=1e-3)
        assert gains_r.mu_bound == pytest.approx(18.68, abs=0.01)
        assert report.Gamma1 == pytest.approx(0.1)

    def test_kappa_t_too_small(self):
        """kappa_t = 0.4 violates kappa_t > 1/2."""
        with pytest.raises(InvalidGainsError, match="kappa_t") as exc:
            validate_gains_t(TranslationalGainsConfig(kappa=0.4).build())
        assert any("kappa_t" in v for v in exc.value.violations)

    def test_mu_t_outside_window(self, gains_t):
        """mu_t at 1.01 times its bound is rejected."""
        g = TranslationalEsoGains(3.0, 2.0, 6.0, 0.8, 1.2, mu_t=1.01 * gains_t.mu_bound)
        with pytest.raises(InvalidGainsError, match="mu_t"):
            validate_gains_t(g)

    def test_kappa_a_at_boundary(self):
        """kappa_a = 1/2 exactly is invalid."""
        with pytest.raises(InvalidGainsError, match="kappa_a"):
            validate_gains_a(RotationalGainsConfig(kappa=0.5).build())

    def test_report_lists_every_violation(self):
        """All failures are collected, not just the first."""
        report = gain_report_t(TranslationalGainsConfig(kappa=0.4, mu=100.0).build())
        assert not report.is_valid
        assert len(report.violations) >= 3
        assert "❌" in str(report)

    def test_Gamma_a1_branches(self, gains_r):
        """Gamma_a1 is the smaller of its two branches."""
        cert = gains_r.certificate
        first = cert.gamma1 - gains_r.mu_a / (2.0 * 4.0**2 * cert.lambda_min_P)
        assert gains_r.Gamma1 == pytest.approx(min(first, 0.6 - 0.5))
        mu = 0.99 * gains_r.mu_bound
        g = RotationalEsoGains(3.0, 2.0, 4.0, 0.6, 1.2, K, mu_a=mu)
        first = cert.gamma1 - mu / (2.0 * 4.0**2 * cert.lambda_min_P)
        assert g.Gamma1 == pytest.approx(min(first, 0.1))

    def test_report_text(self, gains_t):
        """The report prints the certificate and a success line."""
        text = str(gain_report_t(gains_t))
        assert "TRANSLATIONAL OBSERVER GAINS" in text
        assert "✅ All gain constraints satisfied" in text

    def test_settling_time_is_positive(self, gains_r):
        """A valid report yields a finite settling bound."""
        assert 0.0 < gain_report_a(gains_r).settling_time(1.0) < np.inf


class TestLyapunovMonitors:
    """V_t and V_a."""

    def test_zero_errors(self, gains_t, gains_r, body):
        """Both monitors vanish at zero error."""
        zero = _errors_t(ZERO, ZERO, ZERO)
        assert lyapunov_monitor_t(zero, gains_t, body.mass) == pytest.approx(0.0, abs=1e-12)
        assert lyapunov_monitor_a(zero, gains_r, body.J) == pytest.approx(0.0, abs=1e-12)

    def test_positive_away_from_zero(self, gains_t, gains_r, body, random_rotation, rng):
        """Any nonzero error gives V > 0."""
        for _ in range(50):
            e = _errors_t(rng.normal(size=3), rng.normal(size=3), rng.normal(size=3))
            assert lyapunov_monitor_t(e, gains_t, body.mass) > 0.0
            a = _errors_a(random_rotation(), rng.normal(size=3), rng.normal(size=3))
            assert lyapunov_monitor_a(a, gains_r, body.J) > 0.0

    def test_critical_point_value(self, gains_r, body):
        """At a half turn about e1 only the Morse term remains."""
        E_R = np.diag([1.0, -1.0, -1.0])
        V = lyapunov_monitor_a(_errors_a(E_R, ZERO, ZERO), gains_r, body.J)
        assert V == pytest.approx(gains_r.mu_a * 6.0)

    def test_rows_match_scalar_monitors(self, gains_t, gains_r, body, random_rotation, rng):
        """The stacked evaluation agrees with the per-sample monitors, NaN rows included."""
        n = 200
        scale = 10.0 ** rng.uniform(-6.0, 1.0, size=(n, 1))
        e_b, e_v, e_phi, e_Omega, e_tau = (scale * rng.normal(size=(n, 3)) for _ in range(5))
        E_R = np.stack([random_rotation() for _ in range(n)])
        E_R[0] = np.eye(3)
        e_b[0] = e_v[0] = e_phi[0] = e_Omega[0] = e_tau[0] = ZERO
        e_b[-1] = np.nan
        E_R[-1] = np.nan
        with np.errstate(invalid="ignore"):
            V_t, V_a = lyapunov_monitor_rows(
                e_b, e_v, e_phi, E_R, e_Omega, e_tau, gains_t, gains_r, body.mass, body.J
            )
        assert np.isnan(V_t[-1]) and np.isnan(V_a[-1])
        for i in range(n - 1):
            errors = EsoErrors(e_b[i], e_v[i], e_phi[i], E_R[i], e_Omega[i], e_tau[i])
            assert V_t[i] == pytest.approx(
                lyapunov_monitor_t(errors, gains_t, body.mass), rel=1e-9, abs=1e-12
            )
            assert V_a[i] == pytest.approx(
                lyapunov_monitor_a(errors, gains_r, body.J), rel=1e-9, abs=1e-12
            )


def _simulate_translational(g, m, x0, seconds, h=1e-3):
    def rhs(t, x):
        return np.concatenate(translational_error_rhs(x[0:3], x[3:6], x[6:9], g, m))

    xs = [x0]
    x = x0
    for k in range(int(round(seconds / h))):
        x = heun_step(rhs, x, k * h, h)
        xs.append(x)
    return np.array(xs)


def _simulate_rotational(g, J, x0, seconds, h=1e-3):
    def rhs(t, x):
        dE, deO, detau = rotational_error_rhs(x[0:9].reshape(3, 3), x[9:12], x[12:15], g, J)
        return np.concatenate([dE.reshape(9), deO, detau])

    xs = [x0]
    x = x0
    for k in range(int(round(seconds / h))):
        x = heun_step(rhs, x, k * h, h, (slice(0, 9),))
        xs.append(x)
    return np.array(xs)


def _first_below(norms, level):
    below = np.flatnonzero(norms < level)
    assert below.size, "never converged"
    first = int(below[0])
    assert np.all(norms[first:] < level), "left the level after converging"
    return first


class TestConvergence:
    """Noise-free convergence under constant disturbances."""

    def test_translational_force_error(self, gains_t, body, rng):
        """|e_phi| drops below 1e-3 before the settling bound and stays there."""
        h = 1e-3
        report = gain_report_t(gains_t)
        for _ in range(3):
            x0 = _unit_ball(rng, 9)
            V0 = lyapunov_monitor_t(_errors_t(x0[0:3], x0[3:6], x0[6:9]), gains_t, body.mass)
            bound = report.settling_time(V0)
            traj = _simulate_translational(gains_t, body.mass, x0, min(bound, 10.0) + 1.0, h)
            first = _first_below(np.linalg.norm(traj[:, 6:9], axis=1), 1e-3)
            assert first * h < bound

    def test_rotational_torque_error(self, gains_r, body, rng):
        """|e_tau| drops below 1e-3 before the settling bound and stays there."""
        h = 1e-3
        report = gain_report_a(gains_r)
        for _ in range(3):
            E_R = exp_so3(_unit_ball(rng, 3))
            eO, etau = _unit_ball(rng, 3), _unit_ball(rng, 3)
            V0 = lyapunov_monitor_a(_errors_a(E_R, eO, etau), gains_r, body.J)
            bound = report.settling_time(V0)
            x0 = np.concatenate([E_R.reshape(9), eO, etau])
            traj = _simulate_rotational(gains_r, body.J, x0, min(bound, 10.0) + 1.0, h)
            first = _first_below(np.linalg.norm(traj[:, 12:15], axis=1), 1e-3)
            assert first * h < bound

    def test_translational_lyapunov_decrease(self, gains_t, body, rng):
        """Sampled rates of V_t respect the fast finite-time decay inequality."""
        h, p = 1e-3, gains_t.p
        report = gain_report_t(gains_t)
        x0 = _unit_ball(rng, 9)
        traj = _simulate_translational(gains_t, body.mass, x0, 5.0, h)
        V = np.array(
            [lyapunov_monitor_t(_errors_t(x[0:3], x[3:6], x[6:9]), gains_t, body.mass)
             for x in traj]
        )
        rate = np.diff(V) / h
        limit = -report.Gamma1 * V[:-1] - report.Gamma2 * V[:-1] ** (1.0 / p)
        ok = rate <= limit + 1e-6 + 1e-3 * V[:-1]
        assert ok.mean() >= 0.999

    def test_rotational_lyapunov_decrease(self, gains_r, body, rng):
        """Sampled rates of V_a respect the decay inequality from a small attitude error."""
        h, p = 1e-3, gains_r.p
        report = gain_report_a(gains_r)
        E_R = exp_so3(np.array([0.2, -0.1, 0.15]))
        x0 = np.concatenate([E_R.reshape(9), _unit_ball(rng, 3), 0.1 * _unit_ball(rng, 3)])
        traj = _simulate_rotational(gains_r, body.J, x0, 5.0, h)
        V = np.array(
            [lyapunov_monitor_a(_errors_a(x[0:9].reshape(3, 3), x[9:12], x[12:15]), gains_r,
                                body.J)
             for x in traj]
        )
        rate = np.diff(V) / h
        limit = -report.Gamma1 * V[:-1] - report.Gamma2 * V[:-1] ** (1.0 / p)
        ok = rate <= limit + 1e-6 + 1e-3 * V[:-1]
        assert ok.mean() >= 0.999

    @pytest.mark.slow
    def test_attitude_basin(self, gains_r, body, random_rotation):
        """100 random attitude errors at least 1e-2 from the half turns converge to the identity."""
        tried = 0
        while tried < 100:
            E_R = random_rotation()
            if min(principal_angle(C, E_R) for C in CRITICAL_SET[1:]) < 1e-2:
                continue
            tried += 1
            x0 = np.concatenate([E_R.reshape(9), ZERO, ZERO])
            traj = _simulate_rotational(gains_r, body.J, x0, 30.0)
            assert principal_angle(np.eye(3), traj[-1, 0:9].reshape(3, 3)) < 1e-3

    def test_half_turn_is_an_equilibrium(self, gains_r, body):
        """Starting exactly at a half turn with zero rate error stays there."""
        def rhs(t, x):
            dE, deO, detau = rotational_error_rhs(x[0:9].reshape(3, 3), x[9:12], x[12:15],
                                                  gains_r, body.J)
            return np.concatenate([dE.reshape(9), deO, detau])

        x0 = np.concatenate([CRITICAL_SET[3].reshape(9), ZERO, ZERO])
        x = x0
        for k in range(500):
            x = heun_step(rhs, x, k * 1e-3, 1e-3)
        assert_allclose(x, x0)


def test_hat_of_rate_error_drives_attitude_error(random_rotation, rng, gains_r, body):
    """The attitude part of the error dynamics is E_R hat(e_Omega)."""
    E_R, eO = random_rotation(), rng.normal(size=3)
    dE, _, _ = rotational_error_rhs(E_R, eO, ZERO, gains_r, body.J)
    assert_allclose(dE, E_R @ hat(eO))
