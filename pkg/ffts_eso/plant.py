"""
Ground-truth rigid-body model of the vehicle.

Inertial frame is north-east-down: gravity acts along +e3, thrust along
-R e3, so altitude is negative up.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .geometry import Pose, Rotation, Vec3, exp_so3
from .kernels import f64
from .models import DisturbanceProfile, NoiseSpec, RigidBodyParams, ScenarioKind

HOVER_ALTITUDE = -3.0


@dataclass(frozen=True, eq=False)
class RigidBodyState:
    """Pose, inertial velocity and body angular velocity."""

    pose: Pose
    v: Vec3
    Omega: Vec3

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))
        object.__setattr__(self, "Omega", np.asarray(self.Omega, dtype=float).reshape(3))

    @property
    def R(self) -> Rotation:
        return self.pose.rotation

    @property
    def b(self) -> Vec3:
        return self.pose.position

    @property
    def body_velocity(self) -> Vec3:
        """nu = R^T v."""
        return self.R.T @ self.v

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.b, self.v, self.R.reshape(9), self.Omega])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "RigidBodyState":
        return cls(Pose(x[6:15].reshape(3, 3), x[0:3]), x[3:6], x[15:18])


@dataclass(frozen=True, eq=False)
class RigidBodyRates:
    """Time derivative of a :class:`RigidBodyState`."""

    b_dot: Vec3
    v_dot: Vec3
    R_dot: np.ndarray
    Omega_dot: Vec3

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.b_dot, self.v_dot, self.R_dot.reshape(9), self.Omega_dot])


class ReferenceSample(NamedTuple):
    """Desired position and its first two derivatives."""

    b_d: Vec3
    b_d_dot: Vec3
    b_d_ddot: Vec3


class Measurement(NamedTuple):
    """Sensor outputs (b_N, v_N, R_N, Omega_N)."""

    b: Vec3
    v: Vec3
    R: Rotation
    Omega: Vec3


class NoiseSample(NamedTuple):
    """One draw of additive noise, already scaled to per-sample standard deviations."""

    b: Vec3
    v: Vec3
    R: Vec3
    Omega: Vec3


def rigid_body_rates(
    R: Rotation,
    v: Vec3,
    Omega: Vec3,
    f: float,
    tau: Vec3,
    phi_D: Vec3,
    tau_D: Vec3,
    p: RigidBodyParams,
) -> RigidBodyRates:
    """Equations of motion on raw arrays; R need not be exactly orthonormal."""
    b_dot, v_dot, R_dot, Omega_dot = kernels.plant_rates(
        f64(R), f64(v), f64(Omega), float(f), f64(tau), f64(phi_D), f64(tau_D),
        p.mass, p.grav, p.J, p.J_inv,
    )
    return RigidBodyRates(b_dot=b_dot, v_dot=v_dot, R_dot=R_dot, Omega_dot=Omega_dot)


def eval_disturbance(d: DisturbanceProfile, t: float) -> tuple[Vec3, Vec3]:
    """Return (phi_D(t), tau_D(t)); at a switch time the earlier segment holds."""
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    return d.at(t)


def plant_rhs(
    s: RigidBodyState,
    f: float,
    tau: Vec3,
    d: DisturbanceProfile,
    t: float,
    p: RigidBodyParams,
) -> RigidBodyRates:
    """Rigid-body kinematics and dynamics under thrust, torque and disturbances.

    Args:
        s: Current state.
        f: Collective thrust magnitude (N) along -R e3.
        tau: Control torque in the body frame (N m).
        d: Disturbance profile.
        t: Time (s).
        p: Mass properties.

    Returns:
        The state derivative.
    """
    phi_D, tau_D = eval_disturbance(d, t)
    return rigid_body_rates(s.R, s.v, s.Omega, f, tau, phi_D, tau_D, p)


def reference(kind: ScenarioKind, t: float) -> ReferenceSample:
    """Closed-form reference trajectory and its analytic derivatives."""
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    kind = ScenarioKind(kind)
    zero = np.zeros(3)
    if kind is ScenarioKind.HOVERING:
        return ReferenceSample(np.array([0.0, 0.0, HOVER_ALTITUDE]), zero, zero.copy())

    if kind is ScenarioKind.HIGH_PITCH:
        amp, w = 10.0, 0.5 * math.pi
        s, c = math.sin(w * t), math.cos(w * t)
        return ReferenceSample(
            np.array([amp * s, amp * c, HOVER_ALTITUDE]),
            np.array([amp * w * c, -amp * w * s, 0.0]),
            np.array([-amp * w * w * s, -amp * w * w * c, 0.0]),
        )

    amp, w = (10.0, 0.1 * math.pi) if kind is ScenarioKind.SLOW_SWING else (5.0, 0.5 * math.pi)
    s, c = math.sin(w * t), math.cos(w * t)
    return ReferenceSample(
        np.array([amp * s, 0.0, HOVER_ALTITUDE]),
        np.array([amp * w * c, 0.0, 0.0]),
        np.array([-amp * w * w * s, 0.0, 0.0]),
    )


def draw_noise_table(n: NoiseSpec, h: float, rng: np.random.Generator, count: int) -> np.ndarray:
    """Draw ``count`` noise samples at once, one row (b, v, R, Omega) of 12 per sample.

    Each entry has variance PSD / h for its group.
    """
    if not h > 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    return rng.standard_normal((count, 12)) * np.repeat(n.sigmas(h), 3)


def noise_sample(row: np.ndarray) -> NoiseSample:
    """Split one row of :func:`draw_noise_table`."""
    return NoiseSample(row[0:3], row[3:6], row[6:9], row[9:12])


def draw_noise(n: NoiseSpec, h: float, rng: np.random.Generator) -> NoiseSample:
    """Draw one noise sample with per-axis variance PSD / h.

    Twelve standard normals are consumed in the order b, v, R, Omega so a
    given seed always produces the same sequence.
    """
    return noise_sample(draw_noise_table(n, h, rng, 1)[0])


def corrupt(b: Vec3, v: Vec3, R: Rotation, Omega: Vec3, noise: NoiseSample) -> Measurement:
    """Apply a noise sample: additive on vectors, R exp(mu_R^x) on attitude."""
    return Measurement(b + noise.b, v + noise.v, R @ exp_so3(noise.R), Omega + noise.Omega)


def sense(s: RigidBodyState, n: NoiseSpec, h: float, rng: np.random.Generator) -> Measurement:
    """Noisy measurement of the full state."""
    return corrupt(s.b, s.v, s.R, s.Omega, draw_noise(n, h, rng))
