"""
Tests for input pulses, their spectra and the default sampling grids.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError
from scipy import integrate

from cavity_qnd.errors import InvalidParameterError
from cavity_qnd.models import Grid, PulseShape, PulseSpec
from cavity_qnd.services.pulses import (
    breakpoints,
    build_mesh,
    default_grid,
    norm,
    pulse_amplitude,
    pulse_amplitudes,
    pulse_service,
    pulse_spectrum,
)

duration_strategy = st.floats(min_value=0.5, max_value=100.0, allow_nan=False, allow_infinity=False)


class TestPulseSpec:
    """Validation of pulse descriptions"""

    @pytest.mark.parametrize("duration", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_invalid_duration(self, duration):
        with pytest.raises(ValidationError):
            PulseSpec(duration=duration)

    def test_rectangular_edges(self):
        spec = PulseSpec.rectangular(4.0, center=1.0)
        assert spec.lower_edge == -1.0
        assert spec.upper_edge == 3.0
        assert spec.extent == (-1.0, 3.0)

    def test_frozen(self, gaussian_40):
        with pytest.raises(ValidationError):
            gaussian_40.duration = 10.0


class TestPulseAmplitude:
    """Normalization and shape of the input amplitudes"""

    def test_gaussian_peak(self):
        expected = math.sqrt(2.0 / (40.0 * math.sqrt(math.pi)))
        assert pulse_amplitude(PulseSpec.gaussian(40.0), 0.0) == pytest.approx(expected, rel=1e-14)

    def test_rectangular_inside_and_outside(self):
        spec = PulseSpec.rectangular(4.0)
        assert pulse_amplitude(spec, 1.0) == pytest.approx(0.5)
        assert pulse_amplitude(spec, 5.0) == 0.0

    def test_rejects_non_finite_coordinate(self, gaussian_40):
        with pytest.raises(InvalidParameterError):
            pulse_amplitude(gaussian_40, math.nan)

    def test_gaussian_norm_on_fixed_domain(self, gaussian_40):
        grid = Grid(lo=-200.0, hi=200.0, n=8001)
        assert norm(gaussian_40, grid) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("shape", list(PulseShape))
    @pytest.mark.parametrize("duration", [0.7, 5.0, 40.0, 90.0])
    def test_norm_on_default_grid(self, shape, duration):
        spec = PulseSpec(shape=shape, duration=duration, center=1.5)
        assert norm(spec, default_grid(spec, spec)) == pytest.approx(1.0, abs=1e-8)

    @given(duration=duration_strategy, offset=st.floats(min_value=0.0, max_value=300.0))
    @settings(max_examples=50, deadline=None)
    def test_even_about_center(self, duration, offset):
        for shape in PulseShape:
            spec = PulseSpec(shape=shape, duration=duration)
            assert pulse_amplitude(spec, offset) == pulse_amplitude(spec, -offset)

    def test_vectorised_matches_scalar(self, rectangular_20):
        x = np.linspace(-15.0, 15.0, 31)
        expected = [pulse_amplitude(rectangular_20, float(v)) for v in x]
        np.testing.assert_array_equal(pulse_amplitudes(rectangular_20, x), expected)


class TestPulseSpectrum:
    """Analytic Fourier transforms"""

    @pytest.mark.parametrize("shape", list(PulseShape))
    def test_spectrum_is_normalized(self, shape):
        spec = PulseSpec(shape=shape, duration=10.0)
        k = np.linspace(-400.0, 400.0, 400001)
        power = integrate.simpson(np.abs(pulse_spectrum(spec, k)) ** 2, x=k)
        assert power == pytest.approx(1.0, abs=2e-3 if shape is PulseShape.RECTANGULAR else 1e-10)

    def test_gaussian_spectrum_matches_direct_transform(self):
        spec = PulseSpec.gaussian(8.0, center=2.0)
        x = np.linspace(-60.0, 60.0, 24001)
        values = pulse_amplitudes(spec, x)
        for k in (0.0, 0.1, 0.35):
            direct = integrate.simpson(values * np.exp(-1j * k * x), x=x) / math.sqrt(2.0 * math.pi)
            assert complex(pulse_spectrum(spec, k)) == pytest.approx(direct, abs=1e-10)


class TestGrids:
    """Default domains, tails and meshes split at discontinuities"""

    @pytest.mark.parametrize("d_s, d_a", [(40.0, 40.0), (12.5, 40.0)])
    def test_default_domain(self, d_s, d_a):
        grid = default_grid(PulseSpec.gaussian(d_s), PulseSpec.gaussian(d_a))
        assert grid.lo == pytest.approx(-220.0)
        assert grid.hi == pytest.approx(220.0)
        assert grid.spacing <= 0.05 + 1e-12

    def test_spacing_follows_shortest_pulse(self):
        grid = default_grid(PulseSpec.gaussian(0.5), PulseSpec.gaussian(40.0))
        assert grid.spacing <= 0.5 / 50 + 1e-12

    def test_gaussian_tail_mass(self, gaussian_40):
        assert pulse_service.tail_mass(gaussian_40, -220.0, 220.0) < 1e-10

    def test_grid_rejects_inverted_domain(self):
        with pytest.raises(ValidationError):
            Grid(lo=1.0, hi=-1.0, n=10)

    def test_breakpoints(self, rectangular_20, gaussian_40):
        assert breakpoints(rectangular_20) == (-10.0, 10.0)
        assert breakpoints(gaussian_40) == ()

    def test_mesh_splits_at_edges(self, rectangular_20):
        mesh = build_mesh(Grid(lo=-30.0, hi=30.0, n=601), rectangular_20)
        assert mesh.edges == (-30.0, -10.0, 10.0, 30.0)
        assert all(m % 2 == 1 for m in mesh.counts)
        assert np.all(np.diff(mesh.x) >= 0.0)
        amplitudes = pulse_amplitudes(rectangular_20, mesh.x)
        # one-sided limits on either side of each jump
        first = mesh.slices[1]
        assert amplitudes[first.start - 1] == 0.0
        assert amplitudes[first.start] == pytest.approx(1.0 / math.sqrt(20.0))

    def test_rectangular_norm_is_exact(self, rectangular_20):
        assert norm(rectangular_20, Grid(lo=-33.3, hi=27.1, n=200)) == pytest.approx(1.0, abs=1e-12)
