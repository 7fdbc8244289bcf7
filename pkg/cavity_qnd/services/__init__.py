"""Cavity QND Services"""
from .pulses import pulse_service
from .one_photon import one_photon_service
from .two_photon import two_photon_service
from .metrics import metrics_service
from .oracle import oracle_service

__all__ = [
    "pulse_service",
    "one_photon_service",
    "two_photon_service",
    "metrics_service",
    "oracle_service",
]
