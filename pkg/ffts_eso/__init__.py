"""ffts-eso: fast finite-time stable extended state observers on SE(3)."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("ffts-eso")
except PackageNotFoundError:
    # Package not installed, use a default for development
    __version__ = "0.0.0-dev"

from .differentiator import DifferentiatorGains, DiffState, differentiator_rhs, phi1, phi2
from .errors import (
    DomainError,
    FftsEsoError,
    InvalidGainsError,
    NonFiniteStateError,
    NotSkewError,
    NotSPDError,
    ZeroVectorError,
)
from .geometry import MorseWeights, Pose
from .models import ScenarioKind, SimConfig
from .observer import (
    RotationalEsoGains,
    TranslationalEsoGains,
    validate_gains_a,
    validate_gains_t,
)
from .stability import LyapunovCertificate, solve_lyapunov_2x2

__all__ = [
    "DifferentiatorGains",
    "DiffState",
    "differentiator_rhs",
    "phi1",
    "phi2",
    "LyapunovCertificate",
    "solve_lyapunov_2x2",
    "MorseWeights",
    "Pose",
    "TranslationalEsoGains",
    "RotationalEsoGains",
    "validate_gains_t",
    "validate_gains_a",
    "ScenarioKind",
    "SimConfig",
    "FftsEsoError",
    "NotSkewError",
    "ZeroVectorError",
    "NotSPDError",
    "DomainError",
    "InvalidGainsError",
    "NonFiniteStateError",
    "__version__",
]
