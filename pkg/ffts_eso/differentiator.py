"""Hölder-continuous fast finite-time stable differentiator.

The second-order error dynamics

    e1' = -k1 phi1(e1) + e2
    e2' = -k2 phi2(e1)

with ``phi1(e) = k3 e + |e|^(2(1-p)/(3p-2)) e`` and ``phi2 = phi1' phi1``
are the core of both extended state observers. Everything here works on
vectors of any dimension n >= 1.
"""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import DomainError, ZeroVectorError

VecN = npt.NDArray[np.float64]
MatN = npt.NDArray[np.float64]

# Floor on e^T e before taking logarithms; keeps powers finite at the origin.
NORM2_FLOOR = 1e-300


def _check_exponent(p: float) -> None:
    if not (1.0 < p < 2.0):
        raise ValueError(f"Hölder exponent p must lie in (1, 2), got {p}")


def power_norm2(x2: float, c: float) -> float:
    """Return ``x2**c`` computed as ``exp(c * ln(max(x2, 1e-300)))``."""
    return float(np.exp(c * np.log(max(x2, NORM2_FLOOR))))


@dataclass(frozen=True)
class DifferentiatorGains:
    """Gains (k1, k2, k3) and Hölder exponent p of the differentiator."""

    k1: float
    k2: float
    k3: float
    p: float

    def __post_init__(self):
        for name in ("k1", "k2", "k3"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        _check_exponent(self.p)
        eigs = np.linalg.eigvals(self.gain_matrix)
        if not np.all(eigs.real < 0.0):
            raise ValueError(f"gain matrix must be Hurwitz, eigenvalues {eigs}")

    @property
    def gain_matrix(self) -> MatN:
        """The 2x2 matrix [[-k1, 1], [-k2, 0]]."""
        return np.array([[-self.k1, 1.0], [-self.k2, 0.0]])

    @property
    def c1(self) -> float:
        """Exponent (1-p)/(3p-2) applied to e^T e in phi1."""
        return (1.0 - self.p) / (3.0 * self.p - 2.0)

    @property
    def beta(self) -> float:
        """Deflation factor (p-1)/(3p-2) of the phi1 Jacobian power term."""
        return (self.p - 1.0) / (3.0 * self.p - 2.0)


@dataclass(frozen=True)
class DiffState:
    """Differentiator error state (e1, e2), or its time derivative."""

    e1: VecN
    e2: VecN

    def __post_init__(self):
        e1 = np.asarray(self.e1, dtype=float).reshape(-1)
        e2 = np.asarray(self.e2, dtype=float).reshape(-1)
        if e1.shape != e2.shape or e1.size == 0:
            raise ValueError("e1 and e2 must be non-empty vectors of equal length")
        object.__setattr__(self, "e1", e1)
        object.__setattr__(self, "e2", e2)

    @property
    def n(self) -> int:
        return self.e1.size

    def zeta(self, g: DifferentiatorGains) -> tuple[VecN, VecN]:
        """Return the Lyapunov coordinates (phi1(e1), e2)."""
        return phi1(self.e1, g), self.e2

    def to_array(self) -> VecN:
        return np.concatenate([self.e1, self.e2])

    @classmethod
    def from_array(cls, x: VecN) -> "DiffState":
        n = x.size // 2
        return cls(x[:n], x[n:])


def phi1(e1: VecN, g: DifferentiatorGains) -> VecN:
    """phi1(e1) = k3 e1 + (e1^T e1)^((1-p)/(3p-2)) e1, zero at the origin."""
    s = power_norm2(float(e1 @ e1), g.c1)
    return (g.k3 + s) * e1


def phi2(e1: VecN, g: DifferentiatorGains) -> VecN:
    """phi2(e1) = phi1'(e1) phi1(e1) written out in its three terms."""
    p = g.p
    s = power_norm2(float(e1 @ e1), g.c1)
    coef = (
        g.k3**2
        + (2.0 * g.k3 * (2.0 * p - 1.0) / (3.0 * p - 2.0)) * s
        + (p / (3.0 * p - 2.0)) * s * s
    )
    return coef * e1


def phi1_jacobian(e1: VecN, g: DifferentiatorGains) -> MatN:
    """Jacobian of phi1; symmetric positive definite away from the origin.

    Raises:
        ZeroVectorError: If e1^T e1 is below 1e-300.
    """
    e1 = np.asarray(e1, dtype=float)
    ee = float(e1 @ e1)
    if ee < NORM2_FLOOR:
        raise ZeroVectorError("phi1 Jacobian is undefined at e1 = 0")
    s = power_norm2(ee, g.c1)
    eye = np.eye(e1.size)
    return g.k3 * eye + s * (eye - (2.0 * g.beta / ee) * np.outer(e1, e1))


def phi1_jacobian_eigen_bounds(e1: VecN, g: DifferentiatorGains) -> tuple[float, float]:
    """Closed-form (lambda_min, lambda_max) of the phi1 Jacobian."""
    s = power_norm2(float(e1 @ e1), g.c1)
    lam_max = g.k3 + s
    lam_min = g.k3 + (g.p / (3.0 * g.p - 2.0)) * s
    return lam_min, lam_max


def differentiator_rhs(
    s: DiffState,
    g: DifferentiatorGains,
    delta1: VecN | None = None,
    delta2: VecN | None = None,
    noise: VecN | None = None,
) -> DiffState:
    """Time derivative of the (optionally perturbed and noisy) differentiator.

    Args:
        s: Current error state.
        g: Differentiator gains.
        delta1: Additive perturbation on the e1 channel.
        delta2: Additive perturbation on the e2 channel.
        noise: Measurement noise added to e1 inside the nonlinearities.

    Returns:
        The derivative (e1', e2') packed as a DiffState.
    """
    x = s.e1 if noise is None else s.e1 + noise
    de1 = -g.k1 * phi1(x, g) + s.e2
    de2 = -g.k2 * phi2(x, g)
    if delta1 is not None:
        de1 = de1 + delta1
    if delta2 is not None:
        de2 = de2 + delta2
    return DiffState(de1, de2)


def noise_gap_bounds(mu_bar: float, g: DifferentiatorGains) -> tuple[float, float]:
    """Upper bounds on |phi1(e) - phi1(e + mu)| and |phi2(e) - phi2(e + mu)|.

    Valid for every e and every |mu| <= mu_bar.
    """
    if mu_bar < 0.0:
        raise DomainError(f"mu_bar must be nonnegative, got {mu_bar}")
    if mu_bar == 0.0:
        return 0.0, 0.0
    p, k3, b = g.p, g.k3, g.beta
    gap_a = 2.0 ** (2.0 * b) * mu_bar ** (1.0 - 2.0 * b)
    gap_b = 2.0 ** (4.0 * b) * mu_bar ** (1.0 - 4.0 * b)
    bound1 = k3 * mu_bar + gap_a
    bound2 = (
        k3**2 * mu_bar
        + (2.0 * k3 * (2.0 * p - 1.0) / (3.0 * p - 2.0)) * gap_a
        + (p / (3.0 * p - 2.0)) * gap_b
    )
    return bound1, bound2


def noise_gap_function(x: VecN, mu: VecN, alpha: float) -> float:
    """Return Y^T Y with Y = |x|^(-2a) x - |x + mu|^(-2a) (x + mu).

    Raises:
        DomainError: If x = 0, x = -mu, or alpha is outside (0, 1/2).
    """
    if not (0.0 < alpha < 0.5):
        raise DomainError(f"alpha must lie in (0, 1/2), got {alpha}")
    x = np.asarray(x, dtype=float)
    y = x + np.asarray(mu, dtype=float)
    nx = float(np.linalg.norm(x))
    ny = float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        raise DomainError("noise-gap function is undefined at x = 0 and x = -mu")
    gap = nx ** (-2.0 * alpha) * x - ny ** (-2.0 * alpha) * y
    return float(gap @ gap)


def _orthogonal_partner(mu: VecN) -> VecN | None:
    """A vector orthogonal to mu with the same norm, or None when n = 1."""
    if mu.size < 2:
        return None
    basis = np.eye(mu.size)[int(np.argmin(np.abs(mu)))]
    nu = basis - (basis @ mu) / (mu @ mu) * mu
    return nu * (np.linalg.norm(mu) / np.linalg.norm(nu))


def noise_gap_argmax_oracle(
    mu: VecN,
    alpha: float,
    step: float = 1e-3,
    offset: float = 0.0,
    c1_range: tuple[float, float] = (-2.0, 1.0),
    c2_range: tuple[float, float] = (-1.5, 1.5),
) -> VecN:
    """Brute-force maximizer of the noise-gap function.

    Searches the plane x = c1 mu + c2 nu, where nu is orthogonal to mu with
    |nu| = |mu|, on a regular grid. By rotational symmetry about mu the
    maximum over R^n lies in this plane.

    Args:
        mu: Nonzero noise vector.
        alpha: Exponent in (0, 1/2).
        step: Grid spacing in the (c1, c2) coordinates.
        offset: Grid shift as a fraction of ``step``.
        c1_range: Search interval for c1.
        c2_range: Search interval for c2.

    Returns:
        The located maximizer x.
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if not np.any(mu):
        raise DomainError("mu must be nonzero")
    if not (0.0 < alpha < 0.5):
        raise DomainError(f"alpha must lie in (0, 1/2), got {alpha}")
    if step <= 0.0:
        raise DomainError("grid step must be positive")

    nu = _orthogonal_partner(mu)
    r2 = float(mu @ mu)
    n1 = int(round((c1_range[1] - c1_range[0]) / step)) + 1
    c1 = c1_range[0] + (np.arange(n1) + offset) * step
    if nu is None:
        c2 = np.zeros(1)
    else:
        n2 = int(round((c2_range[1] - c2_range[0]) / step)) + 1
        c2 = c2_range[0] + (np.arange(n2) + offset) * step

    best_value = -np.inf
    best = (0.0, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        for b in c2:
            nx2 = r2 * (c1 * c1 + b * b)
            ny2 = r2 * ((1.0 + c1) ** 2 + b * b)
            a_coef = nx2 ** (-alpha)
            b_coef = ny2 ** (-alpha)
            values = r2 * ((a_coef * c1 - b_coef * (1.0 + c1)) ** 2 + ((a_coef - b_coef) * b) ** 2)
            values[(nx2 == 0.0) | (ny2 == 0.0) | ~np.isfinite(values)] = -np.inf
            i = int(np.argmax(values))
            if values[i] > best_value:
                best_value = float(values[i])
                best = (float(c1[i]), float(b))

    x = best[0] * mu
    if nu is not None:
        x = x + best[1] * nu
    return x
