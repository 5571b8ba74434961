"""Small-dimension geometry on SO(3) and SE(3).

Rotations are plain 3x3 float64 ``numpy`` arrays. Functions here never
mutate their inputs; callers that integrate rotations re-project them with
:func:`renormalize` after every step.
"""

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from . import kernels
from .errors import NotSkewError, ZeroVectorError

Vec3 = npt.NDArray[np.float64]
Mat3 = npt.NDArray[np.float64]
Rotation = npt.NDArray[np.float64]

SKEW_TOL = 1e-9
ROTATION_TOL = 1e-9
SMALL_ANGLE = 1e-6
H_MATRIX_EPS2 = 1e-24

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])
IDENTITY = np.eye(3)

# Critical points of the Morse function <K, I - R>.
CRITICAL_SET: tuple[Rotation, ...] = (
    np.eye(3),
    np.diag([1.0, -1.0, -1.0]),
    np.diag([-1.0, 1.0, -1.0]),
    np.diag([-1.0, -1.0, 1.0]),
)


@dataclass(frozen=True)
class MorseWeights:
    """Diagonal weights K = diag(K1, K2, K3) of the attitude Morse function."""

    K1: float
    K2: float
    K3: float
    diag: Vec3 = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.K1 > self.K2 > self.K3 >= 1.0):
            raise ValueError(
                f"Morse weights must satisfy K1 > K2 > K3 >= 1, got "
                f"({self.K1}, {self.K2}, {self.K3})"
            )
        object.__setattr__(self, "diag", np.array([self.K1, self.K2, self.K3], dtype=float))

    @property
    def matrix(self) -> Mat3:
        return np.diag(self.diag)


@dataclass(frozen=True)
class Pose:
    """A rigid-body configuration: attitude and position."""

    rotation: Rotation
    position: Vec3

    def __post_init__(self):
        object.__setattr__(self, "rotation", as_rotation(self.rotation))
        position = np.asarray(self.position, dtype=float).reshape(3)
        if not np.all(np.isfinite(position)):
            raise ValueError("pose position must be finite")
        object.__setattr__(self, "position", position)


def hat(v: Vec3) -> Mat3:
    """Return the cross-product matrix of ``v`` so that ``hat(v) @ w == cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m: Mat3, tol: float = SKEW_TOL) -> Vec3:
    """Inverse of :func:`hat`.

    Raises:
        NotSkewError: If ``m + m.T`` has an entry larger than ``tol``.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    residual = float(np.max(np.abs(m + m.T)))
    if residual > tol:
        raise NotSkewError(f"matrix is not skew-symmetric (residual {residual:.3e})")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def _vee_antisym(m: Mat3) -> Vec3:
    # vee of the skew part, for matrices built as A - A.T
    return 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])


def exp_so3(v: Vec3) -> Rotation:
    """Rodrigues exponential map from a rotation vector to SO(3)."""
    v = np.asarray(v, dtype=float)
    theta = float(np.linalg.norm(v))
    V = hat(v)
    if theta < SMALL_ANGLE:
        return IDENTITY + V + 0.5 * (V @ V)
    return (
        IDENTITY
        + (np.sin(theta) / theta) * V
        + ((1.0 - np.cos(theta)) / theta**2) * (V @ V)
    )


def log_so3(r: Rotation) -> Vec3:
    """Logarithm map SO(3) -> rotation vector with norm in [0, pi]."""
    r = np.asarray(r, dtype=float)
    w = _vee_antisym(r)  # = sin(theta) * axis
    sin_theta = float(np.linalg.norm(w))
    cos_theta = 0.5 * (float(np.trace(r)) - 1.0)
    theta = float(np.arctan2(sin_theta, cos_theta))

    if theta < SMALL_ANGLE:
        return w * (1.0 + theta**2 / 6.0)

    if sin_theta > 1e-3 or cos_theta > 0.0:
        return (theta / sin_theta) * w

    # Near pi: read the axis from the column with the largest diagonal of uu^T.
    uu = (0.5 * (r + r.T) - cos_theta * IDENTITY) / (1.0 - cos_theta)
    i = int(np.argmax(np.diag(uu)))
    axis = uu[:, i] / np.sqrt(uu[i, i])
    if float(axis @ w) < 0.0:
        axis = -axis
    return theta * axis


def exp_so3_rows(v: np.ndarray) -> np.ndarray:
    """:func:`exp_so3` of each row of an (N, 3) array, as an (N, 3, 3) stack."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=1)
    V = np.zeros((v.shape[0], 3, 3))
    V[:, 0, 1], V[:, 0, 2], V[:, 1, 2] = -v[:, 2], v[:, 1], -v[:, 0]
    V[:, 1, 0], V[:, 2, 0], V[:, 2, 1] = v[:, 2], -v[:, 1], v[:, 0]
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0, np.sin(safe) / safe)
    b = np.where(small, 0.5, (1.0 - np.cos(safe)) / safe**2)
    return IDENTITY + a[:, None, None] * V + b[:, None, None] * (V @ V)


def rotation_angle_rows(r: np.ndarray) -> np.ndarray:
    """Rotation angle in [0, pi] of each matrix in an (N, 3, 3) stack; NaN stays NaN."""
    w = 0.5 * np.stack(
        [r[:, 2, 1] - r[:, 1, 2], r[:, 0, 2] - r[:, 2, 0], r[:, 1, 0] - r[:, 0, 1]], axis=1
    )
    cos_theta = 0.5 * (np.trace(r, axis1=1, axis2=2) - 1.0)
    return np.arctan2(np.linalg.norm(w, axis=1), cos_theta)


def orthogonality_residual(m: Mat3) -> float:
    """Frobenius norm of ``m.T @ m - I``."""
    return float(np.linalg.norm(m.T @ m - IDENTITY))


def renormalize(m: Mat3) -> Rotation:
    """Project a near-rotation onto SO(3) with the symmetric polar factor."""
    return kernels.project_rotation(kernels.f64(m))


def as_rotation(m: Mat3, tol: float = ROTATION_TOL) -> Rotation:
    """Validate ``m`` as a rotation matrix and return it as a float array.

    Raises:
        ValueError: If ``m`` is not 3x3, not finite, not orthonormal or not proper.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("rotation has non-finite entries")
    residual = orthogonality_residual(m)
    if residual > tol:
        raise ValueError(f"matrix is not orthonormal (residual {residual:.3e})")
    det = float(np.linalg.det(m))
    if abs(det - 1.0) > tol:
        raise ValueError(f"rotation determinant must be 1, got {det:.12g}")
    return m


def s_K(r: Rotation, k: MorseWeights) -> Vec3:
    """Return sum_i K_i (R^T e_i) x e_i.

    Equal to vee(K R - R^T K) for diagonal K.
    """
    kr = k.diag[:, None] * r
    return _vee_antisym(kr - kr.T)


def morse_value(r: Rotation, k: MorseWeights) -> float:
    """Return <K, I - R> = trace(K^T (I - R))."""
    return float(k.diag @ (1.0 - np.diag(r)))


def in_set_S(r: Rotation) -> bool:
    """True when all R_ii >= 0 and R_ij R_ji <= 0 for i != j."""
    if np.any(np.diag(r) < 0.0):
        return False
    return bool(r[0, 1] * r[1, 0] <= 0.0 and r[0, 2] * r[2, 0] <= 0.0 and r[1, 2] * r[2, 1] <= 0.0)


def h_matrix(x: Vec3, k: float) -> Mat3:
    """Return H(x, k) = I - (2k / x^T x) x x^T.

    Raises:
        ZeroVectorError: If ``x^T x`` is below 1e-24.
    """
    x = np.asarray(x, dtype=float)
    xx = float(x @ x)
    if xx < H_MATRIX_EPS2:
        raise ZeroVectorError("H(x, k) is undefined at x = 0")
    return np.eye(x.size) - (2.0 * k / xx) * np.outer(x, x)


def principal_angle(a: Rotation, b: Rotation) -> float:
    """Angle of the relative rotation a^T b, in [0, pi]."""
    return float(np.linalg.norm(log_so3(a.T @ b)))
