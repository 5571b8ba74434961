"""Lyapunov certificates and settling-time bounds for the differentiator and observers."""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt
from scipy import linalg

from .differentiator import DifferentiatorGains, VecN
from .errors import DomainError, NotSPDError

Mat2 = npt.NDArray[np.float64]

LYAPUNOV_RESIDUAL_TOL = 1e-10


def _check_spd(m: Mat2, name: str) -> Mat2:
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise NotSPDError(f"{name} must be 2x2, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12):
        raise NotSPDError(f"{name} is not symmetric")
    if float(np.linalg.eigvalsh(m)[0]) <= 0.0:
        raise NotSPDError(f"{name} is not positive definite")
    return m


@dataclass(frozen=True, eq=False)
class LyapunovCertificate:
    """Solution P of A^T P + P A = -Q together with the decay constants.

    Attributes:
        A: The 2x2 Hurwitz gain matrix [[-k1, 1], [-k2, 0]].
        P: Symmetric positive-definite solution.
        Q: The right-hand side used (identity unless given).
        gamma1: Exponential-rate constant k3 lambda_min(Q) / lambda_max(P).
        gamma2: Finite-time constant of the V^(1/p) term.
        lambda_min_P: Smallest eigenvalue of P.
        lambda_max_P: Largest eigenvalue of P.
        lambda_min_Q: Smallest eigenvalue of Q.
        p: Hölder exponent the constants were computed for.
    """

    A: Mat2
    P: Mat2
    Q: Mat2
    gamma1: float
    gamma2: float
    lambda_min_P: float
    lambda_max_P: float
    lambda_min_Q: float
    p: float

    @property
    def residual(self) -> float:
        """Max-abs residual of the Lyapunov equation, recomputed from P."""
        a = self.A
        return float(np.max(np.abs(a.T @ self.P + self.P @ a + self.Q)))

    @property
    def condition_ratio(self) -> float:
        """lambda_max(P) / lambda_min(P)."""
        return self.lambda_max_P / self.lambda_min_P

    @property
    def alpha(self) -> float:
        """Finite-time exponent 1/p of the decay inequality."""
        return 1.0 / self.p

    def quadratic(self, a: VecN, b: VecN) -> float:
        """Blockwise form [a; b]^T (P kron I) [a; b]."""
        P = self.P
        return float(P[0, 0] * (a @ a) + 2.0 * P[0, 1] * (a @ b) + P[1, 1] * (b @ b))

    def settling_time(self, v0: float) -> float:
        """Fast finite-time settling bound for an initial Lyapunov value ``v0``."""
        return settling_time_ffts(self.gamma1, self.gamma2, self.alpha, v0)


def solve_lyapunov_2x2(g: DifferentiatorGains, Q: Mat2 | None = None) -> LyapunovCertificate:
    """Solve A^T P + P A = -Q for the gain matrix of ``g`` and fill in gamma1, gamma2.

    Args:
        g: Differentiator (or observer channel) gains.
        Q: Symmetric positive-definite right-hand side; identity by default.

    Returns:
        The certificate.

    Raises:
        NotSPDError: If Q is not symmetric positive definite, or the solution is not.
    """
    Q = np.eye(2) if Q is None else _check_spd(Q, "Q")
    a = g.gain_matrix
    P = linalg.solve_continuous_lyapunov(a.T, -Q)
    P = 0.5 * (P + P.T)
    _check_spd(P, "P")

    eig_p = np.linalg.eigvalsh(P)
    lam_min_p, lam_max_p = float(eig_p[0]), float(eig_p[-1])
    lam_min_q = float(np.linalg.eigvalsh(Q)[0])
    p = g.p
    gamma1 = g.k3 * lam_min_q / lam_max_p
    gamma2 = lam_min_q * lam_min_p ** ((p - 1.0) / p) * p / (lam_max_p * (3.0 * p - 2.0))

    cert = LyapunovCertificate(
        A=a,
        P=P,
        Q=Q,
        gamma1=gamma1,
        gamma2=gamma2,
        lambda_min_P=lam_min_p,
        lambda_max_P=lam_max_p,
        lambda_min_Q=lam_min_q,
        p=p,
    )
    if cert.residual > LYAPUNOV_RESIDUAL_TOL:
        raise NotSPDError(f"Lyapunov residual {cert.residual:.3e} exceeds tolerance")
    return cert


def _check_rate(name: str, value: float) -> None:
    if not value > 0.0:
        raise DomainError(f"{name} must be positive, got {value}")


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def _check_v0(v0: float) -> None:
    if not v0 >= 0.0:
        raise DomainError(f"V0 must be nonnegative, got {v0}")


def settling_time_fts(lam: float, alpha: float, v0: float) -> float:
    """Settling bound of V' <= -lam V^alpha: V0^(1-alpha) / (lam (1-alpha))."""
    _check_rate("lambda", lam)
    _check_alpha(alpha)
    _check_v0(v0)
    return v0 ** (1.0 - alpha) / (lam * (1.0 - alpha))


def settling_time_ffts(lam1: float, lam2: float, alpha: float, v0: float) -> float:
    """Settling bound of V' <= -lam1 V - lam2 V^alpha."""
    _check_rate("lambda1", lam1)
    _check_rate("lambda2", lam2)
    _check_alpha(alpha)
    _check_v0(v0)
    return math.log((lam1 * v0 ** (1.0 - alpha) + lam2) / lam2) / (lam1 * (1.0 - alpha))


@dataclass(frozen=True)
class PftsBound:
    """Residual set and settling bound of V' <= -lam1 V - lam2 V^alpha + eta."""

    theta0: float
    eta: float
    residual_set_level: float
    settling_time_bound: float


def pfts_bound(
    lam1: float, lam2: float, alpha: float, eta: float, theta0: float, v0: float
) -> PftsBound:
    """Practical finite-time bound for a perturbed fast finite-time decay.

    Args:
        lam1: Linear decay rate.
        lam2: Finite-time decay rate.
        alpha: Exponent in (0, 1).
        eta: Constant perturbation level.
        theta0: Splitting parameter in (0, 1).
        v0: Initial Lyapunov value.

    Returns:
        The residual level V converges to and the time it takes at most.
    """
    _check_rate("lambda1", lam1)
    _check_rate("lambda2", lam2)
    _check_alpha(alpha)
    _check_v0(v0)
    if not eta >= 0.0:
        raise DomainError(f"eta must be nonnegative, got {eta}")
    if not (0.0 < theta0 < 1.0):
        raise DomainError(f"theta0 must lie in (0, 1), got {theta0}")

    level = min(
        eta / ((1.0 - theta0) * lam1),
        (eta / ((1.0 - theta0) * lam2)) ** (1.0 / alpha),
    )
    w = v0 ** (1.0 - alpha)
    t_a = math.log((theta0 * lam1 * w + lam2) / lam2) / (theta0 * lam1 * (1.0 - alpha))
    t_b = math.log((lam1 * w + theta0 * lam2) / (theta0 * lam2)) / (lam1 * (1.0 - alpha))
    return PftsBound(
        theta0=theta0, eta=eta, residual_set_level=level, settling_time_bound=max(t_a, t_b)
    )


class MarginStatus(str, Enum):
    """Classification of gamma1 against lambda_max(P) / lambda_min(P)."""

    SATISFIED = "satisfied"
    EQUALITY = "equality"
    VIOLATED = "violated"


@dataclass(frozen=True)
class RobustnessMargin:
    """Disturbance-robustness margin of a certificate.

    A positive ``margin`` gives a nonzero linear decay rate under bounded
    perturbations; equality is reported separately and left to the caller.
    """

    gamma1: float
    ratio: float
    margin: float
    status: MarginStatus

    def pfts(self, cert: LyapunovCertificate, delta_bar: float, theta0: float, v0: float):
        """PFTS bound under perturbations bounded by ``delta_bar``.

        Raises:
            DomainError: If the margin is not strictly positive.
        """
        if self.status is not MarginStatus.SATISFIED:
            raise DomainError(f"robustness margin is {self.status.value}; no decay rate")
        eta = cert.lambda_max_P * delta_bar**2
        return pfts_bound(self.margin, cert.gamma2, cert.alpha, eta, theta0, v0)


def robustness_margin(cert: LyapunovCertificate, rtol: float = 1e-12) -> RobustnessMargin:
    """Compare gamma1 with the condition ratio of P."""
    ratio = cert.condition_ratio
    margin = cert.gamma1 - ratio
    if abs(margin) <= rtol * max(cert.gamma1, ratio):
        status = MarginStatus.EQUALITY
    elif margin > 0.0:
        status = MarginStatus.SATISFIED
    else:
        status = MarginStatus.VIOLATED
    return RobustnessMargin(gamma1=cert.gamma1, ratio=ratio, margin=margin, status=status)
