"""Shared fixtures for the cavity QND tests"""
import pytest

from cavity_qnd.models import PulseSpec


@pytest.fixture
def gaussian_40() -> PulseSpec:
    return PulseSpec.gaussian(40.0)


@pytest.fixture
def gaussian_10() -> PulseSpec:
    return PulseSpec.gaussian(10.0)


@pytest.fixture
def rectangular_20() -> PulseSpec:
    return PulseSpec.rectangular(20.0)
