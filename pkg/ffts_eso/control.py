"""Geometric tracking controller on SE(3).

Position PD produces a desired thrust vector, whose direction fixes the desired
attitude; an attitude PD on SO(3) produces the torque. Disturbance estimates
passed as ``fb_phi``/``fb_tau`` are cancelled in the force and torque laws.
"""

from typing import NamedTuple

from . import kernels
from .geometry import Rotation, Vec3
from .kernels import f64
from .models import ControllerGains, RigidBodyParams
from .plant import ReferenceSample, RigidBodyState


class ControlOutput(NamedTuple):
    """Collective thrust (N), body torque (N m) and the commanded attitude."""

    f: float
    tau: Vec3
    R_d: Rotation


def desired_attitude(b3d: Vec3, yaw: float) -> Rotation:
    """Rotation whose third column is ``b3d`` with heading as close to ``yaw`` as possible."""
    return kernels.desired_attitude(f64(b3d), float(yaw))


def attitude_error(R: Rotation, R_d: Rotation) -> Vec3:
    """e_R = 1/2 vee(R_d^T R - R^T R_d)."""
    return kernels.attitude_error(f64(R), f64(R_d))


def control_law(
    b: Vec3,
    v: Vec3,
    R: Rotation,
    Omega: Vec3,
    ref: ReferenceSample,
    fb_phi: Vec3,
    fb_tau: Vec3,
    p: RigidBodyParams,
    gains: ControllerGains,
) -> ControlOutput:
    """:func:`tracking_control` on raw arrays, without building a validated state."""
    f, tau, R_d = kernels.control_law(
        f64(b), f64(v), f64(R), f64(Omega),
        f64(ref.b_d), f64(ref.b_d_dot), f64(ref.b_d_ddot), f64(fb_phi), f64(fb_tau),
        p.mass, p.grav, p.J, gains.packed,
    )
    return ControlOutput(float(f), tau, R_d)


def tracking_control(
    s: RigidBodyState,
    ref: ReferenceSample,
    fb_phi: Vec3,
    fb_tau: Vec3,
    p: RigidBodyParams,
    gains: ControllerGains,
) -> ControlOutput:
    """Thrust and torque that track ``ref``.

    Args:
        s: State the controller acts on (usually the measured one).
        ref: Desired position, velocity and acceleration.
        fb_phi: Force disturbance estimate to cancel; zeros disables rejection.
        fb_tau: Torque disturbance estimate to cancel.
        p: Mass properties.
        gains: Controller gains and optional saturation limits.

    Returns:
        The control pair (f, tau) and the commanded attitude.
    """
    return control_law(s.b, s.v, s.R, s.Omega, ref, fb_phi, fb_tau, p, gains)
