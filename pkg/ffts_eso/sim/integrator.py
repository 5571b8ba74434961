"""Fixed-step Heun (explicit trapezoidal) integration."""

from collections.abc import Callable, Sequence

import numpy as np

from ..errors import NonFiniteStateError
from ..geometry import renormalize

Rhs = Callable[[float, np.ndarray], np.ndarray]


def heun_step(
    rhs: Rhs,
    state: np.ndarray,
    t: float,
    h: float,
    rotation_slices: Sequence[slice] = (),
) -> np.ndarray:
    """Advance ``state`` from ``t`` to ``t + h`` with Heun's method.

    k1 = f(t, x); k2 = f(t + h, x + h k1); x+ = x + h/2 (k1 + k2).

    Rotation blocks (each a slice of 9 row-major entries) are stepped as raw
    matrices and then projected back onto SO(3).

    Raises:
        NonFiniteStateError: If the new state has a non-finite entry.
    """
    if not h > 0.0:
        raise ValueError(f"step size must be positive, got {h}")
    k1 = rhs(t, state)
    k2 = rhs(t + h, state + h * k1)
    out = state + (0.5 * h) * (k1 + k2)
    if not np.all(np.isfinite(out)):
        raise NonFiniteStateError(t + h)
    for sl in rotation_slices:
        out[sl] = renormalize(out[sl].reshape(3, 3)).reshape(9)
    return out


def integrate(rhs: Rhs, x0: np.ndarray, t0: float, h: float, steps: int) -> np.ndarray:
    """Take ``steps`` Heun steps and return the trajectory, one row per sample."""
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((steps + 1, x.size))
    out[0] = x
    for k in range(steps):
        x = heun_step(rhs, x, t0 + k * h, h)
        out[k + 1] = x
    return out
