"""Perturbation-based gradient estimators for discrete exponential families."""

from ._core import *  # noqa: F401,F403
from ._core import (
    AimleController,
    Error,
    GuardExceeded,
    InvalidArgument,
    PolytopeSpec,
    Rng,
    Unsupported,
)

__version__ = "0.1.0"
