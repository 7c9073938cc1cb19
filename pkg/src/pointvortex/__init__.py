"""Point-vortex dynamics in planar domains with collapse diagnostics."""

__version__ = "0.1.0"

from .config import RunConfig, parse_config, serialize_config  # noqa: E402
from .dynamics import (  # noqa: E402
    IntegratorSettings,
    TrajectoryRecord,
    VortexConfiguration,
    integrate,
    velocity_field,
)
from .geometry import ConformalDisk, HalfPlane, Plane, UnitDisk  # noqa: E402
from .kernels import BACKEND  # noqa: E402

__all__ = [
    "BACKEND",
    "ConformalDisk",
    "HalfPlane",
    "IntegratorSettings",
    "Plane",
    "RunConfig",
    "TrajectoryRecord",
    "UnitDisk",
    "VortexConfiguration",
    "integrate",
    "parse_config",
    "serialize_config",
    "velocity_field",
]
