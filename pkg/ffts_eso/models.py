"""
Pydantic models for simulation configuration.

Every default reproduces the reference simulation protocol: observer gains,
vehicle inertia and mass, initial state, step disturbances and measurement
noise levels. Models are plain data; numeric helpers expose them as numpy
arrays for the integration loop.
"""

import math
from bisect import bisect_left
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .geometry import MorseWeights
from .observer import RotationalEsoGains, TranslationalEsoGains

Triple = tuple[float, float, float]


class ScenarioKind(str, Enum):
    """Reference trajectories flown by the simulated vehicle."""

    HOVERING = "hover"
    SLOW_SWING = "slow-swing"
    FAST_SWING = "fast-swing"
    HIGH_PITCH = "high-pitch"


class NoiseSpec(BaseModel):
    """Measurement noise as power spectral densities per axis."""

    psd_b: float = Field(default=3e-8, ge=0.0, description="position PSD")
    psd_v: float = Field(default=3e-7, ge=0.0, description="velocity PSD")
    psd_R: float = Field(default=3e-8, ge=0.0, description="attitude PSD")
    psd_Omega: float = Field(default=3e-7, ge=0.0, description="body-rate PSD")
    seed: int = 0

    def sigmas(self, h: float) -> tuple[float, float, float, float]:
        """Per-sample standard deviations sqrt(PSD / h) of (b, v, R, Omega)."""
        return (
            math.sqrt(self.psd_b / h),
            math.sqrt(self.psd_v / h),
            math.sqrt(self.psd_R / h),
            math.sqrt(self.psd_Omega / h),
        )


class RigidBodyParams(BaseModel):
    """Mass properties of the vehicle."""

    mass: float = Field(default=4.34, gt=0.0)
    inertia: list[list[float]] = Field(
        default_factory=lambda: [[0.0820, 0.0, 0.0], [0.0, 0.0845, 0.0], [0.0, 0.0, 0.1377]]
    )
    grav: float = Field(default=9.81, ge=0.0)

    @field_validator("inertia", mode="before")
    @classmethod
    def diagonal_shorthand(cls, v):
        """Accept a 3-vector as the diagonal of J."""
        if isinstance(v, (list, tuple)) and len(v) == 3 and all(
            isinstance(x, (int, float)) for x in v
        ):
            return np.diag(np.asarray(v, dtype=float)).tolist()
        return v

    @field_validator("inertia")
    @classmethod
    def inertia_must_be_spd(cls, v: list[list[float]]) -> list[list[float]]:
        """Validate that J is 3x3 symmetric positive definite."""
        J = np.asarray(v, dtype=float)
        if J.shape != (3, 3):
            raise ValueError(f"inertia must be 3x3, got shape {J.shape}")
        if not np.allclose(J, J.T, rtol=0.0, atol=1e-12):
            raise ValueError("inertia must be symmetric")
        if float(np.linalg.eigvalsh(J)[0]) <= 0.0:
            raise ValueError("inertia must be positive definite")
        return v

    @cached_property
    def J(self) -> np.ndarray:
        return np.asarray(self.inertia, dtype=float)

    @cached_property
    def J_inv(self) -> np.ndarray:
        return np.linalg.inv(self.J)


class DisturbanceStep(BaseModel):
    """A constant value holding from ``t`` until the next step."""

    model_config = ConfigDict(frozen=True)

    t: float = Field(ge=0.0)
    value: Triple


def _default_force() -> list[DisturbanceStep]:
    return [
        DisturbanceStep(t=0.0, value=(5.0, 10.0, 0.0)),
        DisturbanceStep(t=10.0, value=(9.0, 15.0, 5.0)),
    ]


def _default_torque() -> list[DisturbanceStep]:
    return [
        DisturbanceStep(t=0.0, value=(-0.1, 0.1, 0.1)),
        DisturbanceStep(t=20.0, value=(0.0, 0.0, 0.2)),
    ]


class DisturbanceProfile(BaseModel):
    """Piecewise-constant force and torque disturbances."""

    force: list[DisturbanceStep] = Field(default_factory=_default_force)
    torque: list[DisturbanceStep] = Field(default_factory=_default_torque)

    @field_validator("force", "torque")
    @classmethod
    def steps_must_be_ordered(cls, v: list[DisturbanceStep]) -> list[DisturbanceStep]:
        """Validate that the first step starts at 0 and times strictly increase."""
        if not v:
            raise ValueError("at least one step is required")
        if v[0].t != 0.0:
            raise ValueError(f"first step must start at t = 0, got {v[0].t}")
        for prev, cur in zip(v, v[1:]):
            if not cur.t > prev.t:
                raise ValueError(f"switch times must strictly increase ({prev.t} -> {cur.t})")
        return v

    @classmethod
    def constant(cls, force: Triple = (0.0, 0.0, 0.0), torque: Triple = (0.0, 0.0, 0.0)):
        """A profile with a single constant segment per channel."""
        return cls(
            force=[DisturbanceStep(t=0.0, value=force)],
            torque=[DisturbanceStep(t=0.0, value=torque)],
        )

    @cached_property
    def segments(self):
        return (
            [s.t for s in self.force],
            np.array([s.value for s in self.force], dtype=float),
            [s.t for s in self.torque],
            np.array([s.value for s in self.torque], dtype=float),
        )

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Left-continuous evaluation: at a switch time the earlier value holds."""
        ft, fv, tt, tv = self.segments
        i = max(bisect_left(ft, t) - 1, 0)
        j = max(bisect_left(tt, t) - 1, 0)
        return fv[i].copy(), tv[j].copy()

    def sample(self, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """:meth:`at` over an array of times; rows of (phi_D, tau_D)."""
        ft, fv, tt, tv = self.segments
        i = np.maximum(np.searchsorted(ft, times, side="left") - 1, 0)
        j = np.maximum(np.searchsorted(tt, times, side="left") - 1, 0)
        return fv[i], tv[j]

    @property
    def switch_times(self) -> list[float]:
        """All switch times after t = 0, sorted."""
        return sorted({s.t for s in self.force[1:]} | {s.t for s in self.torque[1:]})


class ControllerGains(BaseModel):
    """Geometric tracking controller gains (per unit mass / inertia)."""

    kx: float = Field(default=4.0, gt=0.0)
    kv: float = Field(default=2.8, gt=0.0)
    kR: float = Field(default=400.0, gt=0.0)
    kOmega: float = Field(default=32.0, gt=0.0)
    yaw: float = 0.0
    max_thrust: float | None = Field(default=None, gt=0.0)
    max_torque: float | None = Field(default=None, gt=0.0)

    @property
    def packed(self) -> np.ndarray:
        """(kx, kv, kR, kOmega, yaw, max_thrust, max_torque) with inf for an absent limit."""
        limits = [math.inf if x is None else x for x in (self.max_thrust, self.max_torque)]
        return np.array([self.kx, self.kv, self.kR, self.kOmega, self.yaw, *limits])


class TranslationalGainsConfig(BaseModel):
    """Translational observer gains."""

    k1: float = Field(default=3.0, gt=0.0)
    k2: float = Field(default=2.0, gt=0.0)
    k3: float = Field(default=6.0, gt=0.0)
    kappa: float = 0.8
    p: float = Field(default=1.2, gt=1.0, lt=2.0)
    mu: float | None = None

    def build(self) -> TranslationalEsoGains:
        return TranslationalEsoGains(self.k1, self.k2, self.k3, self.kappa, self.p, self.mu)


class RotationalGainsConfig(BaseModel):
    """Rotational observer gains and Morse weights."""

    k1: float = Field(default=3.0, gt=0.0)
    k2: float = Field(default=2.0, gt=0.0)
    k3: float = Field(default=4.0, gt=0.0)
    kappa: float = 0.6
    p: float = Field(default=1.2, gt=1.0, lt=2.0)
    K: Triple = (3.0, 2.0, 1.0)
    mu: float | None = None

    @field_validator("K")
    @classmethod
    def weights_must_be_ordered(cls, v: Triple) -> Triple:
        """Validate K1 > K2 > K3 >= 1."""
        MorseWeights(*v)
        return v

    def build(self) -> RotationalEsoGains:
        return RotationalEsoGains(
            self.k1, self.k2, self.k3, self.kappa, self.p, MorseWeights(*self.K), self.mu
        )


class LesoConfig(BaseModel):
    """Linear ESO baseline bandwidths.

    The attitude bandwidth is three times the attitude loop bandwidth
    sqrt(kR) = 20 rad/s of the default controller.
    """

    omega_trans: float = Field(default=10.0, gt=0.0)
    omega_att: float = Field(default=60.0, gt=0.0)
    singularity_threshold: float = Field(default=1e-3, gt=0.0, lt=1.0)


class FxtsdoConfig(BaseModel):
    """Fixed-time disturbance observer baseline gains."""

    l1: float = Field(default=5.0, gt=0.0)
    l2: float = Field(default=0.5, gt=0.0)
    alpha: float = Field(default=0.5, gt=0.0, lt=1.0)
    beta: float = Field(default=1.5, gt=1.0)
    c: float = Field(default=20.0, gt=0.0)


class InitialConditions(BaseModel):
    """Initial vehicle state; attitude is a rotation vector."""

    attitude: Triple = (0.0, 0.0, 0.0)
    Omega: Triple = (0.0, 0.0, 0.0)
    position: Triple = (0.01, 0.0, 0.0)
    velocity: Triple = (5.0 * math.pi, 0.0, 0.0)


class EstimateOffsets(BaseModel):
    """Initial estimation errors (truth minus estimate); zero starts observers at truth.

    ``attitude`` is the rotation vector of E_R = R_hat^T R.
    """

    b: Triple = (0.0, 0.0, 0.0)
    v: Triple = (0.0, 0.0, 0.0)
    phi: Triple = (0.0, 0.0, 0.0)
    attitude: Triple = (0.0, 0.0, 0.0)
    Omega: Triple = (0.0, 0.0, 0.0)
    tau: Triple = (0.0, 0.0, 0.0)


class SimConfig(BaseModel):
    """A complete experiment description."""

    scenario: ScenarioKind = ScenarioKind.HOVERING
    h: float = Field(default=1e-3, gt=0.0)
    duration: float = Field(default=30.0, gt=0.0)
    noise_enabled: bool = False
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    body: RigidBodyParams = Field(default_factory=RigidBodyParams)
    disturbance: DisturbanceProfile = Field(default_factory=DisturbanceProfile)
    controller: ControllerGains = Field(default_factory=ControllerGains)
    translational: TranslationalGainsConfig = Field(default_factory=TranslationalGainsConfig)
    rotational: RotationalGainsConfig = Field(default_factory=RotationalGainsConfig)
    leso: LesoConfig = Field(default_factory=LesoConfig)
    fxtsdo: FxtsdoConfig = Field(default_factory=FxtsdoConfig)
    initial: InitialConditions = Field(default_factory=InitialConditions)
    estimate_offsets: EstimateOffsets = Field(default_factory=EstimateOffsets)
    baselines: bool = True
    reject: bool = False
    out_dir: Path = Path("results")

    @model_validator(mode="after")
    def duration_covers_one_step(self) -> "SimConfig":
        """Validate T >= h."""
        if self.duration < self.h:
            raise ValueError(f"duration ({self.duration}) must be >= h ({self.h})")
        return self

    @property
    def steps(self) -> int:
        """Number of integration steps, floor(T / h)."""
        return int(math.floor(self.duration / self.h + 1e-9))

    @property
    def run_name(self) -> str:
        """File stem ``<scenario>_<noise>[_reject][_eso]``.

        ``_reject`` marks disturbance feedforward; ``_eso`` marks a run without
        the comparison baselines.
        """
        name = f"{self.scenario.value}_{'noisy' if self.noise_enabled else 'clean'}"
        if self.reject:
            name += "_reject"
        if not self.baselines:
            name += "_eso"
        return name
