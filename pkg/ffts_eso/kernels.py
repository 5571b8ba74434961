"""Compiled equations of motion, observer dynamics and control law.

Everything here is compiled with numba and works on contiguous float64
arrays. :mod:`ffts_eso.plant`, :mod:`ffts_eso.observer` and
:mod:`ffts_eso.control` wrap these kernels; the runner calls
:func:`heun_closed_loop` directly on the flat 42-entry state

    b, v, R (row-major), Omega, b_hat, v_hat, phi_hat, R_hat, Omega_hat, tau_hat

Packed gain vectors:

    translational  (k1, k2, k3, kappa, p)
    rotational     (k1, k2, k3, kappa, p, K1, K2, K3)
    controller     (kx, kv, kR, kOmega, yaw, max_thrust, max_torque), inf for no limit
"""

import math

import numba
import numpy as np

from .differentiator import NORM2_FLOOR

STATE_SIZE = 42
MIN_THRUST_VECTOR = 1e-6


def f64(a) -> np.ndarray:
    """``a`` as a contiguous float64 array, the layout every kernel is compiled for."""
    return np.ascontiguousarray(a, dtype=np.float64)


@numba.njit(cache=True)
def _pow2(x2, c):
    return math.exp(c * math.log(max(x2, NORM2_FLOOR)))


@numba.njit(cache=True)
def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@numba.njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@numba.njit(cache=True)
def _mv(M, v):
    out = np.empty(3)
    for i in range(3):
        out[i] = M[i, 0] * v[0] + M[i, 1] * v[1] + M[i, 2] * v[2]
    return out


@numba.njit(cache=True)
def _mtv(M, v):
    # M^T v
    out = np.empty(3)
    for i in range(3):
        out[i] = M[0, i] * v[0] + M[1, i] * v[1] + M[2, i] * v[2]
    return out


@numba.njit(cache=True)
def _mm(A, B):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
    return out


@numba.njit(cache=True)
def _mtm(A, B):
    # A^T B
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = A[0, i] * B[0, j] + A[1, i] * B[1, j] + A[2, i] * B[2, j]
    return out


@numba.njit(cache=True)
def _hat(w):
    out = np.zeros((3, 3))
    out[0, 1] = -w[2]
    out[0, 2] = w[1]
    out[1, 0] = w[2]
    out[1, 2] = -w[0]
    out[2, 0] = -w[1]
    out[2, 1] = w[0]
    return out


@numba.njit(cache=True)
def _det(M):
    return (
        M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
        - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
        + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0])
    )


@numba.njit(cache=True)
def _unpack(x, start):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = x[start + 3 * i + j]
    return out


@numba.njit(cache=True)
def _pack(x, start, M):
    for i in range(3):
        for j in range(3):
            x[start + 3 * i + j] = M[i, j]


@numba.njit(cache=True)
def _phi(e, k3, p):
    # (phi1(e), phi2(e)) of the differentiator
    d = 3.0 * p - 2.0
    s = _pow2(_dot(e, e), (1.0 - p) / d)
    c2 = k3 * k3 + (2.0 * k3 * (2.0 * p - 1.0) / d) * s + (p / d) * s * s
    return (k3 + s) * e, c2 * e


@numba.njit(cache=True)
def _sliding(x, y, kappa, p):
    s = _pow2(_dot(x, x), (1.0 - p) / p)
    return y + kappa * (x + s * x)


@numba.njit(cache=True)
def _h_term(x, y, p, eps):
    xx = _dot(x, x)
    if xx < eps * eps:
        return y.copy()
    k = (p - 1.0) / p
    s = _pow2(xx, (1.0 - p) / p)
    return s * (y - (2.0 * k / xx) * _dot(x, y) * x) + y


@numba.njit(cache=True)
def project_rotation(M):
    """Nearest rotation to ``M`` through its SVD, with the determinant sign fixed."""
    u, _, vt = np.linalg.svd(M)
    r = _mm(u, vt)
    if _det(r) < 0.0:
        u[:, 2] = -u[:, 2]
        r = _mm(u, vt)
    return r


@numba.njit(cache=True)
def plant_rates(R, v, Omega, f, tau, phi_D, tau_D, mass, grav, J, J_inv):
    """(b', v', R', Omega') of the rigid body under thrust along -R e3 and torque."""
    v_dot = np.empty(3)
    for i in range(3):
        g = grav if i == 2 else 0.0
        v_dot[i] = g - (f / mass) * R[i, 2] + phi_D[i] / mass
    Omega_dot = _mv(J_inv, _cross(_mv(J, Omega), Omega) + tau + tau_D)
    return v.copy(), v_dot, _mm(R, _hat(Omega)), Omega_dot


@numba.njit(cache=True)
def translational_rates(b_hat, v_hat, phi_hat, b_N, v_N, R_N, f, gains, mass, grav, eps):
    """(b_hat', v_hat', phi_hat') of the translational observer."""
    k1, k2, k3, kappa, p = gains[0], gains[1], gains[2], gains[3], gains[4]
    eb = b_N - b_hat
    ev = v_N - v_hat
    psi = _sliding(eb, ev, kappa, p)
    p1, p2 = _phi(psi, k3, p)
    h = _h_term(eb, ev, p, eps)
    v_dot = np.empty(3)
    for i in range(3):
        g = grav if i == 2 else 0.0
        v_dot[i] = g - (f / mass) * R_N[i, 2] + k1 * p1[i] + kappa * h[i] + phi_hat[i] / mass
    return v_hat.copy(), v_dot, mass * k2 * p2


@numba.njit(cache=True)
def rotational_rates(R_hat, Omega_hat, tau_hat, R_N, Omega_N, tau_c, gains, J, J_inv, eps):
    """(R_hat', Omega_hat', tau_hat') of the rotational observer."""
    k1, k2, k3, kappa, p = gains[0], gains[1], gains[2], gains[3], gains[4]
    K1, K2, K3 = gains[5], gains[6], gains[7]
    E = _mtm(R_hat, R_N)
    Omega_rel = _mtv(E, Omega_hat)
    eO = Omega_N - Omega_rel

    eR = np.empty(3)
    eR[0] = K3 * E[2, 1] - K2 * E[1, 2]
    eR[1] = K1 * E[0, 2] - K3 * E[2, 0]
    eR[2] = K2 * E[1, 0] - K1 * E[0, 1]
    weighted = np.empty(3)
    weighted[0] = K1 * eO[0]
    weighted[1] = K2 * eO[1]
    weighted[2] = K3 * eO[2]
    trace_k = K1 * E[0, 0] + K2 * E[1, 1] + K3 * E[2, 2]
    ew = trace_k * eO - _mtv(E, weighted)

    psi = _sliding(eR, eO, kappa, p)
    p1, p2 = _phi(psi, k3, p)
    body = (
        _mv(J_inv, _cross(_mv(J, Omega_N), Omega_N) + tau_hat + tau_c)
        + k1 * p1
        + kappa * _h_term(eR, ew, p, eps)
    )
    Omega_hat_dot = _mv(E, body + _cross(eO, Omega_rel))
    return _mm(R_hat, _hat(Omega_hat)), Omega_hat_dot, k2 * _mv(J, p2)


@numba.njit(cache=True)
def closed_loop_rates(
    x, f, tau, phi_D, tau_D, noise_b, noise_v, noise_R, noise_Omega,
    mass, grav, J, J_inv, gains_t, gains_r, eps,
):
    """Derivative of the flat state; observers see R_N = R noise_R and additive noise."""
    out = np.empty(STATE_SIZE)
    R = _unpack(x, 6)
    b_dot, v_dot, R_dot, Omega_dot = plant_rates(
        R, x[3:6], x[15:18], f, tau, phi_D, tau_D, mass, grav, J, J_inv
    )
    out[0:3] = b_dot
    out[3:6] = v_dot
    _pack(out, 6, R_dot)
    out[15:18] = Omega_dot

    R_N = _mm(R, noise_R)
    bh_dot, vh_dot, ph_dot = translational_rates(
        x[18:21], x[21:24], x[24:27], x[0:3] + noise_b, x[3:6] + noise_v, R_N,
        f, gains_t, mass, grav, eps,
    )
    out[18:21] = bh_dot
    out[21:24] = vh_dot
    out[24:27] = ph_dot

    Rh_dot, Oh_dot, th_dot = rotational_rates(
        _unpack(x, 27), x[36:39], x[39:42], R_N, x[15:18] + noise_Omega,
        tau, gains_r, J, J_inv, eps,
    )
    _pack(out, 27, Rh_dot)
    out[36:39] = Oh_dot
    out[39:42] = th_dot
    return out


@numba.njit(cache=True)
def heun_closed_loop(
    x, h, f, tau, phi_0, tau_0, phi_1, tau_1, noise_b, noise_v, noise_R, noise_Omega,
    mass, grav, J, J_inv, gains_t, gains_r, eps,
):
    """One Heun step of :func:`closed_loop_rates`, then both attitude blocks projected.

    ``phi_0, tau_0`` are the disturbances at the start of the step and
    ``phi_1, tau_1`` at its end. A non-finite result is returned unprojected.
    """
    k1 = closed_loop_rates(
        x, f, tau, phi_0, tau_0, noise_b, noise_v, noise_R, noise_Omega,
        mass, grav, J, J_inv, gains_t, gains_r, eps,
    )
    k2 = closed_loop_rates(
        x + h * k1, f, tau, phi_1, tau_1, noise_b, noise_v, noise_R, noise_Omega,
        mass, grav, J, J_inv, gains_t, gains_r, eps,
    )
    out = x + (0.5 * h) * (k1 + k2)
    if not np.all(np.isfinite(out)):
        return out
    _pack(out, 6, project_rotation(_unpack(out, 6)))
    _pack(out, 27, project_rotation(_unpack(out, 27)))
    return out


@numba.njit(cache=True)
def desired_attitude(b3d, yaw):
    """Rotation with third column ``b3d`` and heading as close to ``yaw`` as possible."""
    b1c = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    b2d = _cross(b3d, b1c)
    n = math.sqrt(_dot(b2d, b2d))
    if n < MIN_THRUST_VECTOR:
        b2d = _cross(b3d, np.array([0.0, 1.0, 0.0]))
        n = math.sqrt(_dot(b2d, b2d))
    b2d = b2d / n
    b1d = _cross(b2d, b3d)
    R_d = np.empty((3, 3))
    for i in range(3):
        R_d[i, 0] = b1d[i]
        R_d[i, 1] = b2d[i]
        R_d[i, 2] = b3d[i]
    return R_d


@numba.njit(cache=True)
def attitude_error(R, R_d):
    """e_R = 1/2 vee(R_d^T R - R^T R_d)."""
    M = _mtm(R_d, R)
    out = np.empty(3)
    out[0] = 0.5 * (M[2, 1] - M[1, 2])
    out[1] = 0.5 * (M[0, 2] - M[2, 0])
    out[2] = 0.5 * (M[1, 0] - M[0, 1])
    return out


@numba.njit(cache=True)
def control_law(b, v, R, Omega, b_d, b_d_dot, b_d_ddot, fb_phi, fb_tau, mass, grav, J, gains):
    """Geometric tracking law; returns (f, tau, R_d)."""
    kx, kv, kR, kOmega, yaw = gains[0], gains[1], gains[2], gains[3], gains[4]
    max_thrust, max_torque = gains[5], gains[6]
    a_cmd = -kx * (b - b_d) - kv * (v - b_d_dot) + b_d_ddot
    thrust = np.empty(3)
    for i in range(3):
        g = mass * grav if i == 2 else 0.0
        thrust[i] = g - mass * a_cmd[i] + fb_phi[i]
    norm = math.sqrt(_dot(thrust, thrust))
    if norm < MIN_THRUST_VECTOR:
        b3d = np.array([0.0, 0.0, 1.0])
    else:
        b3d = thrust / norm
    f = thrust[0] * R[0, 2] + thrust[1] * R[1, 2] + thrust[2] * R[2, 2]
    if not math.isinf(max_thrust):
        f = min(max(f, 0.0), max_thrust)

    R_d = desired_attitude(b3d, yaw)
    e_R = attitude_error(R, R_d)
    tau = -_cross(_mv(J, Omega), Omega) - _mv(J, kR * e_R + kOmega * Omega) - fb_tau
    if not math.isinf(max_torque):
        n_tau = math.sqrt(_dot(tau, tau))
        if n_tau > max_torque:
            tau = tau * (max_torque / n_tau)
    return f, tau, R_d
