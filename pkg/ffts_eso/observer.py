"""Extended state observers on SE(3).

The translational observer estimates position, velocity and the force
disturbance; the rotational observer estimates attitude, body rate and the
torque disturbance. In error coordinates both reduce to the differentiator of
:mod:`ffts_eso.differentiator` driven by the sliding variables psi_t, psi_a.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .differentiator import NORM2_FLOOR, DifferentiatorGains, phi1, phi2, power_norm2
from .errors import InvalidGainsError
from .geometry import Mat3, MorseWeights, Rotation, Vec3, hat, morse_value, s_K
from .kernels import f64
from .stability import LyapunovCertificate, settling_time_ffts, solve_lyapunov_2x2

# Below this error norm the singular H-term is dropped.
EPS_H = 1e-9


def h_term(x: Vec3, y: Vec3, p: float, eps: float = EPS_H) -> Vec3:
    """Return (x^T x)^((1-p)/p) H(x, (p-1)/p) y + y.

    This is d/dt[x + (x^T x)^((1-p)/p) x] for x' = y. The power factor is
    dropped when |x| < eps.
    """
    xx = float(x @ x)
    if xx < eps * eps:
        return y
    k = (p - 1.0) / p
    s = power_norm2(xx, (1.0 - p) / p)
    return s * (y - (2.0 * k / xx) * float(x @ y) * x) + y


def _sliding(x: Vec3, y: Vec3, kappa: float, p: float) -> Vec3:
    s = power_norm2(float(x @ x), (1.0 - p) / p)
    return y + kappa * (x + s * x)


@dataclass(frozen=True, eq=False)
class TranslationalEsoGains:
    """Gains of the translational observer.

    ``mu_t`` is an analysis constant used by the Lyapunov monitor; it
    defaults to half of its admissible upper bound.
    """

    kt1: float
    kt2: float
    kt3: float
    kappa_t: float
    p: float
    mu_t: float | None = None
    channel: DifferentiatorGains = field(init=False, repr=False)
    certificate: LyapunovCertificate = field(init=False, repr=False)
    mu_bound: float = field(init=False)
    packed: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        channel = DifferentiatorGains(self.kt1, self.kt2, self.kt3, self.p)
        cert = solve_lyapunov_2x2(channel)
        bound = self.kt3**3 * cert.lambda_min_P * cert.lambda_min_Q / cert.lambda_max_P
        object.__setattr__(self, "channel", channel)
        object.__setattr__(self, "certificate", cert)
        object.__setattr__(self, "mu_bound", bound)
        if self.mu_t is None:
            object.__setattr__(self, "mu_t", 0.5 * bound)
        packed = np.array([self.kt1, self.kt2, self.kt3, self.kappa_t, self.p])
        object.__setattr__(self, "packed", packed)

    @property
    def Gamma1(self) -> float:
        cert = self.certificate
        return min(
            cert.gamma1 - self.mu_t / (self.kt3**2 * cert.lambda_min_P),
            2.0 * self.kappa_t - 1.0,
        )

    @property
    def Gamma2(self) -> float:
        p = self.p
        branch = 2.0 * self.kappa_t * max(self.mu_t, 0.0) ** ((p - 1.0) / p)
        return min(self.certificate.gamma2, branch)


@dataclass(frozen=True, eq=False)
class RotationalEsoGains:
    """Gains of the rotational observer, including the Morse weights K."""

    ka1: float
    ka2: float
    ka3: float
    kappa_a: float
    p: float
    K: MorseWeights
    mu_a: float | None = None
    channel: DifferentiatorGains = field(init=False, repr=False)
    certificate: LyapunovCertificate = field(init=False, repr=False)
    mu_bound: float = field(init=False)
    packed: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        channel = DifferentiatorGains(self.ka1, self.ka2, self.ka3, self.p)
        cert = solve_lyapunov_2x2(channel)
        bound = 2.0 * self.ka3**3 * cert.lambda_min_P * cert.lambda_min_Q / cert.lambda_max_P
        object.__setattr__(self, "channel", channel)
        object.__setattr__(self, "certificate", cert)
        object.__setattr__(self, "mu_bound", bound)
        if self.mu_a is None:
            object.__setattr__(self, "mu_a", 0.5 * bound)
        packed = np.array([self.ka1, self.ka2, self.ka3, self.kappa_a, self.p, *self.K.diag])
        object.__setattr__(self, "packed", packed)

    @property
    def Gamma1(self) -> float:
        cert = self.certificate
        return min(
            cert.gamma1 - self.mu_a / (2.0 * self.ka3**2 * cert.lambda_min_P),
            self.kappa_a - 0.5,
        )

    @property
    def Gamma2(self) -> float:
        p = self.p
        branch = self.kappa_a * max(self.mu_a, 0.0) ** ((p - 1.0) / p)
        return min(self.certificate.gamma2, branch)


@dataclass
class GainReport:
    """Outcome of an observer gain check."""

    name: str
    certificate: LyapunovCertificate
    mu: float
    mu_bound: float
    Gamma1: float
    Gamma2: float
    violations: list[str] = field(default_factory=list)

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def settling_time(self, v0: float) -> float:
        """Settling bound for the observer Lyapunov function from ``v0``."""
        return settling_time_ffts(self.Gamma1, self.Gamma2, 1.0 / self.certificate.p, v0)

    def __str__(self) -> str:
        cert = self.certificate
        lines = []
        lines.append("=" * 60)
        lines.append(f"{self.name.upper()} OBSERVER GAINS")
        lines.append("=" * 60)
        lines.append(f"P = [[{cert.P[0, 0]:.6g}, {cert.P[0, 1]:.6g}], "
                     f"[{cert.P[1, 0]:.6g}, {cert.P[1, 1]:.6g}]]")
        lines.append(f"lambda_min(P) = {cert.lambda_min_P:.6g}, "
                     f"lambda_max(P) = {cert.lambda_max_P:.6g}")
        lines.append(f"Lyapunov residual = {cert.residual:.3e}")
        lines.append(f"gamma1 = {cert.gamma1:.6g}, gamma2 = {cert.gamma2:.6g}")
        lines.append(f"mu = {self.mu:.6g} (window 0 < mu < {self.mu_bound:.6g})")
        lines.append(f"Gamma1 = {self.Gamma1:.6g}, Gamma2 = {self.Gamma2:.6g}")
        lines.append("")
        if self.is_valid:
            lines.append("✅ All gain constraints satisfied")
        else:
            for violation in self.violations:
                lines.append(f"❌ {violation}")
        lines.append("=" * 60)
        return "\n".join(lines)


def _common_violations(kappa: float, mu: float, mu_bound: float, G1: float, G2: float, tag: str):
    violations = []
    if not kappa > 0.5:
        violations.append(f"kappa_{tag} = {kappa} must be > 1/2")
    if not (0.0 < mu < mu_bound):
        violations.append(f"mu_{tag} = {mu:.6g} outside window (0, {mu_bound:.6g})")
    if not G1 > 0.0:
        violations.append(f"Gamma_{tag}1 = {G1:.6g} must be positive")
    if not G2 > 0.0:
        violations.append(f"Gamma_{tag}2 = {G2:.6g} must be positive")
    return violations


def gain_report_t(g: TranslationalEsoGains) -> GainReport:
    """Evaluate every translational gain constraint without raising."""
    return GainReport(
        name="translational",
        certificate=g.certificate,
        mu=g.mu_t,
        mu_bound=g.mu_bound,
        Gamma1=g.Gamma1,
        Gamma2=g.Gamma2,
        violations=_common_violations(g.kappa_t, g.mu_t, g.mu_bound, g.Gamma1, g.Gamma2, "t"),
    )


def gain_report_a(g: RotationalEsoGains) -> GainReport:
    """Evaluate every rotational gain constraint without raising."""
    return GainReport(
        name="rotational",
        certificate=g.certificate,
        mu=g.mu_a,
        mu_bound=g.mu_bound,
        Gamma1=g.Gamma1,
        Gamma2=g.Gamma2,
        violations=_common_violations(g.kappa_a, g.mu_a, g.mu_bound, g.Gamma1, g.Gamma2, "a"),
    )


def validate_gains_t(g: TranslationalEsoGains) -> GainReport:
    """Check the translational gains.

    Raises:
        InvalidGainsError: Listing every violated constraint.
    """
    report = gain_report_t(g)
    if not report.is_valid:
        raise InvalidGainsError(report.violations)
    return report


def validate_gains_a(g: RotationalEsoGains) -> GainReport:
    """Check the rotational gains.

    Raises:
        InvalidGainsError: Listing every violated constraint.
    """
    report = gain_report_a(g)
    if not report.is_valid:
        raise InvalidGainsError(report.violations)
    return report


@dataclass(frozen=True, eq=False)
class TranslationalEsoState:
    """Estimates (b_hat, v_hat, phi_hat), or their time derivatives."""

    b_hat: Vec3
    v_hat: Vec3
    phi_hat: Vec3

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.b_hat, self.v_hat, self.phi_hat])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "TranslationalEsoState":
        return cls(x[0:3], x[3:6], x[6:9])


@dataclass(frozen=True, eq=False)
class RotationalEsoState:
    """Estimates (R_hat, Omega_hat, tau_hat), or their time derivatives."""

    R_hat: Rotation
    Omega_hat: Vec3
    tau_hat: Vec3

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.R_hat.reshape(9), self.Omega_hat, self.tau_hat])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "RotationalEsoState":
        return cls(x[0:9].reshape(3, 3), x[9:12], x[12:15])


@dataclass(frozen=True, eq=False)
class EsoErrors:
    """Estimation errors of both observers against the truth."""

    e_b: Vec3
    e_v: Vec3
    e_phi: Vec3
    E_R: Rotation
    e_Omega: Vec3
    e_tau: Vec3

    @classmethod
    def compute(
        cls,
        b: Vec3,
        v: Vec3,
        R: Rotation,
        Omega: Vec3,
        phi_D: Vec3,
        tau_D: Vec3,
        est_t: TranslationalEsoState,
        est_r: RotationalEsoState,
    ) -> "EsoErrors":
        E_R = est_r.R_hat.T @ R
        return cls(
            e_b=b - est_t.b_hat,
            e_v=v - est_t.v_hat,
            e_phi=phi_D - est_t.phi_hat,
            E_R=E_R,
            e_Omega=Omega - E_R.T @ est_r.Omega_hat,
            e_tau=tau_D - est_r.tau_hat,
        )


def psi_t(e_b: Vec3, e_v: Vec3, g: TranslationalEsoGains) -> Vec3:
    """Translational sliding variable e_v + kappa_t (e_b + |e_b|^(2(1-p)/p) e_b)."""
    return _sliding(e_b, e_v, g.kappa_t, g.p)


def psi_a(e_R: Vec3, e_Omega: Vec3, g: RotationalEsoGains) -> Vec3:
    """Rotational sliding variable e_Omega + kappa_a (e_R + |e_R|^(2(1-p)/p) e_R)."""
    return _sliding(e_R, e_Omega, g.kappa_a, g.p)


def e_w(E_R: Rotation, e_Omega: Vec3, K: MorseWeights) -> Vec3:
    """Return sum_i K_i e_i x (e_Omega x E_R^T e_i), the rate of s_K(E_R).

    Expanded with the vector triple product: (trace(K E_R) I - E_R^T K) e_Omega.
    """
    k = K.diag
    return float(k @ np.diag(E_R)) * e_Omega - E_R.T @ (k * e_Omega)


def translational_eso_rhs(
    est: TranslationalEsoState,
    meas_b: Vec3,
    meas_v: Vec3,
    meas_R: Rotation,
    thrust_f: float,
    g: TranslationalEsoGains,
    m: float,
    grav: float,
) -> TranslationalEsoState:
    """Time derivative of the translational observer state."""
    b_dot, v_dot, phi_dot = kernels.translational_rates(
        f64(est.b_hat), f64(est.v_hat), f64(est.phi_hat), f64(meas_b), f64(meas_v),
        f64(meas_R), float(thrust_f), g.packed, float(m), float(grav), EPS_H,
    )
    return TranslationalEsoState(b_hat=b_dot, v_hat=v_dot, phi_hat=phi_dot)


def rotational_eso_rhs(
    est: RotationalEsoState,
    meas_R: Rotation,
    meas_Omega: Vec3,
    control_tau: Vec3,
    g: RotationalEsoGains,
    J: Mat3,
    J_inv: Mat3 | None = None,
) -> RotationalEsoState:
    """Time derivative of the rotational observer state.

    ``J_inv`` may be passed to skip the inversion in tight loops.
    """
    if J_inv is None:
        J_inv = np.linalg.inv(J)
    R_dot, Omega_dot, tau_dot = kernels.rotational_rates(
        f64(est.R_hat), f64(est.Omega_hat), f64(est.tau_hat), f64(meas_R), f64(meas_Omega),
        f64(control_tau), g.packed, f64(J), f64(J_inv), EPS_H,
    )
    return RotationalEsoState(R_hat=R_dot, Omega_hat=Omega_dot, tau_hat=tau_dot)


def translational_error_rhs(
    e_b: Vec3,
    e_v: Vec3,
    e_phi: Vec3,
    g: TranslationalEsoGains,
    m: float,
    phi_dot: Vec3 | None = None,
) -> tuple[Vec3, Vec3, Vec3]:
    """Closed translational error dynamics (e_b', e_v', e_phi')."""
    psi = psi_t(e_b, e_v, g)
    ev_dot = e_phi / m - g.kt1 * phi1(psi, g.channel) - g.kappa_t * h_term(e_b, e_v, g.p)
    ephi_dot = -m * g.kt2 * phi2(psi, g.channel)
    if phi_dot is not None:
        ephi_dot = ephi_dot + phi_dot
    return e_v.copy(), ev_dot, ephi_dot


def rotational_error_rhs(
    E_R: Rotation,
    e_Omega: Vec3,
    e_tau: Vec3,
    g: RotationalEsoGains,
    J: Mat3,
    tau_dot: Vec3 | None = None,
) -> tuple[Rotation, Vec3, Vec3]:
    """Closed rotational error dynamics (E_R', e_Omega', e_tau')."""
    eR = s_K(E_R, g.K)
    ew = e_w(E_R, e_Omega, g.K)
    psi = psi_a(eR, e_Omega, g)
    eO_dot = (
        np.linalg.solve(J, e_tau)
        - g.ka1 * phi1(psi, g.channel)
        - g.kappa_a * h_term(eR, ew, g.p)
    )
    etau_dot = -g.ka2 * (J @ phi2(psi, g.channel))
    if tau_dot is not None:
        etau_dot = etau_dot + tau_dot
    return E_R @ hat(e_Omega), eO_dot, etau_dot


def lyapunov_monitor_t(errors: EsoErrors, g: TranslationalEsoGains, m: float) -> float:
    """V_t = zeta_t^T P_t zeta_t + mu_t e_b^T e_b with zeta_t = (phi1(psi_t), e_phi / m)."""
    psi = psi_t(errors.e_b, errors.e_v, g)
    zeta = phi1(psi, g.channel)
    return g.certificate.quadratic(zeta, errors.e_phi / m) + g.mu_t * float(
        errors.e_b @ errors.e_b
    )


def lyapunov_monitor_a(errors: EsoErrors, g: RotationalEsoGains, J: Mat3) -> float:
    """V_a = zeta_a^T P_a zeta_a + mu_a <K, I - E_R> with zeta_a = (phi1(psi_a), J^-1 e_tau)."""
    eR = s_K(errors.E_R, g.K)
    psi = psi_a(eR, errors.e_Omega, g)
    zeta_a = phi1(psi, g.channel)
    zeta_b = np.linalg.solve(J, errors.e_tau)
    return g.certificate.quadratic(zeta_a, zeta_b) + g.mu_a * morse_value(errors.E_R, g.K)


def _phi1_rows(e: np.ndarray, g: DifferentiatorGains) -> np.ndarray:
    s = np.exp(g.c1 * np.log(np.maximum(np.einsum("ni,ni->n", e, e), NORM2_FLOOR)))
    return (g.k3 + s)[:, None] * e


def _sliding_rows(x: np.ndarray, y: np.ndarray, kappa: float, p: float) -> np.ndarray:
    xx = np.maximum(np.einsum("ni,ni->n", x, x), NORM2_FLOOR)
    s = np.exp((1.0 - p) / p * np.log(xx))
    return y + kappa * (x + s[:, None] * x)


def _quadratic_rows(P: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (
        P[0, 0] * np.einsum("ni,ni->n", a, a)
        + 2.0 * P[0, 1] * np.einsum("ni,ni->n", a, b)
        + P[1, 1] * np.einsum("ni,ni->n", b, b)
    )


def lyapunov_monitor_rows(
    e_b: np.ndarray,
    e_v: np.ndarray,
    e_phi: np.ndarray,
    E_R: np.ndarray,
    e_Omega: np.ndarray,
    e_tau: np.ndarray,
    g_t: TranslationalEsoGains,
    g_r: RotationalEsoGains,
    m: float,
    J: Mat3,
) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise V_t and V_a over stacked errors (vectors (N, 3), E_R (N, 3, 3)).

    Agrees with :func:`lyapunov_monitor_t` and :func:`lyapunov_monitor_a` row by
    row; NaN rows give NaN.
    """
    zeta_t = _phi1_rows(_sliding_rows(e_b, e_v, g_t.kappa_t, g_t.p), g_t.channel)
    V_t = _quadratic_rows(g_t.certificate.P, zeta_t, e_phi / m)
    V_t = V_t + g_t.mu_t * np.einsum("ni,ni->n", e_b, e_b)

    kr = g_r.K.diag[None, :, None] * E_R
    e_R = np.stack(
        [
            kr[:, 2, 1] - kr[:, 1, 2],
            kr[:, 0, 2] - kr[:, 2, 0],
            kr[:, 1, 0] - kr[:, 0, 1],
        ],
        axis=1,
    )
    zeta_a = _phi1_rows(_sliding_rows(e_R, e_Omega, g_r.kappa_a, g_r.p), g_r.channel)
    zeta_b = np.linalg.solve(J, e_tau.T).T
    morse = (1.0 - np.diagonal(E_R, axis1=1, axis2=2)) @ g_r.K.diag
    V_a = _quadratic_rows(g_r.certificate.P, zeta_a, zeta_b) + g_r.mu_a * morse
    return V_t, V_a
