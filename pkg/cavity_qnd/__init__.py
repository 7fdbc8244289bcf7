"""Cavity QND - photon scattering off a two-sided atom-cavity system

Effective one- and two-photon scattering in the bad-cavity limit and the
figures of merit of a quantum non-demolition photon detector built on it.
"""
from .config import Settings, get_settings
from .errors import (
    BracketError,
    ConvergenceError,
    InvalidParameterError,
    NormDriftError,
    QndError,
    ResolutionError,
)
from .models import (
    CavityParams,
    Channel,
    DurationMode,
    Grid,
    PhysicalScenario,
    PulseShape,
    PulseSpec,
    QndMetrics,
    Side,
    WeakLightSpec,
)

__version__ = "1.0.0"

__all__ = [
    "Settings",
    "get_settings",
    "QndError",
    "InvalidParameterError",
    "ResolutionError",
    "ConvergenceError",
    "BracketError",
    "NormDriftError",
    "CavityParams",
    "Channel",
    "DurationMode",
    "Grid",
    "PhysicalScenario",
    "PulseShape",
    "PulseSpec",
    "QndMetrics",
    "Side",
    "WeakLightSpec",
]
