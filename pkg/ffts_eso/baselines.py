"""Comparison disturbance observers.

Two reference designs the FFTS-ESO is compared against:

* LESO: a third-order linear extended state observer per axis. Its attitude
  channel runs on ZYX Euler angles extracted from the measured rotation and
  so inherits the pitch singularity.
* FxTSDO: a fixed-time sliding-surface disturbance observer whose innovation
  uses accelerations obtained by backward differences of measured velocities.

Both are stepped with forward Euler at the simulation step and never feed
back into the FFTS-ESO path.
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import E3, Mat3, Rotation, Vec3
from .models import FxtsdoConfig, LesoConfig, RigidBodyParams
from .plant import Measurement

LOG = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e9


def _out_of_bounds(*arrays: np.ndarray) -> bool:
    for a in arrays:
        if not np.all(np.isfinite(a)) or np.any(np.abs(a) > DIVERGENCE_LIMIT):
            return True
    return False


def wrap_angle(x: float) -> float:
    """Wrap to [-pi, pi)."""
    return (x + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class EulerReading:
    """ZYX Euler angles (roll, pitch, yaw) and the singularity flag of one extraction."""

    angles: Vec3
    singular: bool


def euler_zyx(
    R: Rotation, prev: Vec3 | None = None, threshold: float = 1e-3
) -> EulerReading:
    """Extract continuous ZYX Euler angles from ``R``.

    Roll and yaw are unwrapped against ``prev``. Near pitch = +-pi/2 (that is,
    |cos(pitch)| below ``threshold``) the pitch is clamped, roll and yaw are
    held at their previous values and the reading is flagged singular. A
    roll or yaw jump larger than pi/2 in one sample is flagged as well: it is
    the branch switch that happens when the attitude passes through the
    singularity between samples.
    """
    pitch = -math.asin(min(max(float(R[2, 0]), -1.0), 1.0))
    if abs(math.cos(pitch)) < threshold:
        pitch = math.copysign(math.acos(threshold), pitch)
        if prev is not None:
            roll, yaw = float(prev[0]), float(prev[2])
        else:
            roll, yaw = 0.0, math.atan2(-float(R[0, 1]), float(R[1, 1]))
        return EulerReading(np.array([roll, pitch, yaw]), True)

    roll = math.atan2(float(R[2, 1]), float(R[2, 2]))
    yaw = math.atan2(float(R[1, 0]), float(R[0, 0]))
    singular = False
    if prev is not None:
        d_roll = wrap_angle(roll - float(prev[0]))
        d_yaw = wrap_angle(yaw - float(prev[2]))
        singular = max(abs(d_roll), abs(d_yaw)) > 0.5 * math.pi
        roll = float(prev[0]) + d_roll
        yaw = float(prev[2]) + d_yaw
    return EulerReading(np.array([roll, pitch, yaw]), singular)


# LESO


@dataclass(frozen=True, eq=False)
class LesoChannel:
    """Three-axis third-order linear ESO: output, rate and total disturbance estimates."""

    z1: Vec3
    z2: Vec3
    z3: Vec3


def leso_gains(omega: float) -> tuple[float, float, float]:
    """Bandwidth parameterization (3 w, 3 w^2, w^3)."""
    return 3.0 * omega, 3.0 * omega**2, omega**3


def leso_channel_step(c: LesoChannel, y: Vec3, u: Vec3, omega: float, h: float) -> LesoChannel:
    """One forward-Euler step of z1' = z2 + b1 e, z2' = z3 + u + b2 e, z3' = b3 e."""
    b1, b2, b3 = leso_gains(omega)
    e = y - c.z1
    return LesoChannel(
        z1=c.z1 + h * (c.z2 + b1 * e),
        z2=c.z2 + h * (c.z3 + u + b2 * e),
        z3=c.z3 + h * (b3 * e),
    )


@dataclass(frozen=True, eq=False)
class LesoState:
    """Translational and Euler-angle LESO channels.

    ``singular`` reports the last Euler extraction; ``diverged`` latches once
    any estimate leaves [-1e9, 1e9] or becomes non-finite.
    """

    trans: LesoChannel
    att: LesoChannel
    euler: Vec3
    singular: bool = False
    diverged: bool = False

    @classmethod
    def initial(
        cls,
        b: Vec3,
        v: Vec3,
        R: Rotation,
        Omega: Vec3,
        phi: Vec3,
        tau: Vec3,
        body: RigidBodyParams,
        cfg: LesoConfig,
    ) -> "LesoState":
        """Observer started at the given truth."""
        reading = euler_zyx(R, threshold=cfg.singularity_threshold)
        return cls(
            trans=LesoChannel(b.copy(), v.copy(), phi / body.mass),
            att=LesoChannel(reading.angles, Omega.copy(), body.J_inv @ tau),
            euler=reading.angles,
            singular=reading.singular,
        )

    def phi_hat(self, body: RigidBodyParams) -> Vec3:
        return body.mass * self.trans.z3

    def tau_hat(self, body: RigidBodyParams) -> Vec3:
        return body.J @ self.att.z3


def leso_step(
    s: LesoState,
    meas: Measurement,
    f: float,
    tau: Vec3,
    body: RigidBodyParams,
    cfg: LesoConfig,
    h: float,
) -> LesoState:
    """Advance both LESO channels by one step.

    The translational model input is g e3 - (f/m) R_N e3; the attitude model
    input is J^-1 (tau + J Omega x Omega) applied directly to the Euler-angle
    accelerations, with the kinematic mismatch lumped into the disturbance.
    """
    if s.diverged:
        return s
    reading = euler_zyx(meas.R, s.euler, cfg.singularity_threshold)
    if reading.singular and not s.singular:
        LOG.debug("Euler extraction near pitch singularity: %s", reading.angles)

    u_t = body.grav * E3 - (f / body.mass) * meas.R[:, 2]
    u_a = body.J_inv @ (tau + np.cross(body.J @ meas.Omega, meas.Omega))
    trans = leso_channel_step(s.trans, meas.b, u_t, cfg.omega_trans, h)
    att = leso_channel_step(s.att, reading.angles, u_a, cfg.omega_att, h)

    diverged = _out_of_bounds(trans.z1, trans.z2, trans.z3, att.z1, att.z2, att.z3)
    if diverged:
        LOG.warning("LESO estimates diverged")
    return LesoState(trans, att, reading.angles, reading.singular, diverged)


# FxTSDO


def sig(x: np.ndarray, a: float) -> np.ndarray:
    """Signed power |x|^a sign(x), elementwise."""
    return np.sign(x) * np.abs(x) ** a


def finite_difference_acceleration(x: Vec3, x_prev: Vec3, h: float) -> Vec3:
    """Backward difference (x - x_prev) / h."""
    if not h > 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    return (x - x_prev) / h


@dataclass(frozen=True, eq=False)
class FxtsdoChannel:
    """Auxiliary rate estimate, disturbance estimate and the previous samples."""

    z: Vec3
    d_hat: Vec3
    x_prev: Vec3
    a_prev: Vec3


def fxtsdo_channel_step(
    c: FxtsdoChannel,
    x: Vec3,
    a_model: Vec3,
    M: Mat3,
    M_inv: Mat3,
    cfg: FxtsdoConfig,
    h: float,
) -> FxtsdoChannel:
    """One step of the fixed-time observer on a single channel.

    The sliding variable

        sigma = M (a_fd - a_model_avg) - d_hat + c M (x - z)

    compares the disturbance implied by the differenced measurement with the
    estimate. The auxiliary rate z integrates the model plus the estimate, so
    its tracking error x - z carries the part of the disturbance d_hat has not
    yet absorbed.

    Args:
        c: Channel state.
        x: Measured rate (velocity or body rate).
        a_model: Model acceleration without disturbance at this sample.
        M: Mass or inertia matrix mapping acceleration to force.
        M_inv: Inverse of ``M``.
        cfg: Observer gains.
        h: Step size.
    """
    a_fd = finite_difference_acceleration(x, c.x_prev, h)
    sigma = M @ (a_fd - 0.5 * (a_model + c.a_prev) + cfg.c * (x - c.z)) - c.d_hat
    d_hat = c.d_hat + h * (cfg.l1 * sig(sigma, cfg.alpha) + cfg.l2 * sig(sigma, cfg.beta))
    z = c.z + h * (a_model + M_inv @ c.d_hat + cfg.c * (x - c.z))
    return FxtsdoChannel(z=z, d_hat=d_hat, x_prev=x.copy(), a_prev=a_model.copy())


def model_acceleration_t(meas: Measurement, f: float, body: RigidBodyParams) -> Vec3:
    """Undisturbed translational acceleration g e3 - (f/m) R e3."""
    return body.grav * E3 - (f / body.mass) * meas.R[:, 2]


def model_acceleration_r(meas: Measurement, tau: Vec3, body: RigidBodyParams) -> Vec3:
    """Undisturbed angular acceleration J^-1 (J Omega x Omega + tau)."""
    return body.J_inv @ (np.cross(body.J @ meas.Omega, meas.Omega) + tau)


@dataclass(frozen=True, eq=False)
class FxtsdoState:
    """Force and torque channels of the fixed-time observer."""

    trans: FxtsdoChannel
    rot: FxtsdoChannel
    diverged: bool = False

    @classmethod
    def initial(
        cls,
        meas: Measurement,
        f: float,
        tau: Vec3,
        phi: Vec3,
        tau_D: Vec3,
        body: RigidBodyParams,
    ) -> "FxtsdoState":
        """Observer started at the given disturbance values."""
        a_t = model_acceleration_t(meas, f, body)
        a_r = model_acceleration_r(meas, tau, body)
        return cls(
            trans=FxtsdoChannel(meas.v.copy(), phi.copy(), meas.v.copy(), a_t),
            rot=FxtsdoChannel(meas.Omega.copy(), tau_D.copy(), meas.Omega.copy(), a_r),
        )

    @property
    def phi_hat(self) -> Vec3:
        return self.trans.d_hat

    @property
    def tau_hat(self) -> Vec3:
        return self.rot.d_hat


def fxtsdo_step(
    s: FxtsdoState,
    meas: Measurement,
    f: float,
    tau: Vec3,
    body: RigidBodyParams,
    cfg: FxtsdoConfig,
    h: float,
) -> FxtsdoState:
    """Advance both FxTSDO channels with the current measurement and control."""
    if s.diverged:
        return s
    mass = body.mass * np.eye(3)
    trans = fxtsdo_channel_step(
        s.trans, meas.v, model_acceleration_t(meas, f, body), mass, np.eye(3) / body.mass, cfg, h
    )
    rot = fxtsdo_channel_step(
        s.rot, meas.Omega, model_acceleration_r(meas, tau, body), body.J, body.J_inv, cfg, h
    )
    diverged = _out_of_bounds(trans.z, trans.d_hat, rot.z, rot.d_hat)
    if diverged:
        LOG.warning("FxTSDO estimates diverged")
    return replace(s, trans=trans, rot=rot, diverged=diverged)
