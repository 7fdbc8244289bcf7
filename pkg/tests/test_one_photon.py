"""
Tests for effective one-photon scattering.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavity_qnd.errors import InvalidParameterError
from cavity_qnd.models import CavityParams, PulseShape, PulseSpec, Side
from cavity_qnd.services.one_photon import (
    absorbed_amplitude,
    absorbed_amplitudes,
    frequency_domain_transmittance,
    one_photon_output,
    spectral_coefficients,
)
from cavity_qnd.services.oracle import brute_force_one_photon


class TestAbsorbedAmplitude:
    """psi_abs(x) = -(1/2) integral over x' > x of exp(-(x' - x)/2) pulse(x')"""

    @pytest.mark.parametrize("x", [-9.0, -3.3, 0.0, 4.0, 9.5])
    def test_rectangular_closed_form(self, rectangular_20, x):
        expected = -(1.0 - math.exp(-0.5 * (10.0 - x))) / math.sqrt(20.0)
        assert absorbed_amplitude(rectangular_20, x) == pytest.approx(expected, abs=1e-10)
        assert absorbed_amplitudes(rectangular_20, np.array([x]))[0] == pytest.approx(expected, abs=1e-14)

    def test_rectangular_below_support(self, rectangular_20):
        expected = -math.exp(-0.5 * 5.0) * (1.0 - math.exp(-10.0)) / math.sqrt(20.0)
        assert absorbed_amplitudes(rectangular_20, np.array([-15.0]))[0] == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("spec", [PulseSpec.gaussian(40.0), PulseSpec.rectangular(4.0)])
    def test_vanishes_beyond_support(self, spec):
        assert absorbed_amplitude(spec, 500.0) == 0.0
        assert absorbed_amplitudes(spec, np.array([500.0]))[0] == pytest.approx(0.0, abs=1e-100)

    @pytest.mark.parametrize("duration", [0.5, 4.0, 40.0, 300.0])
    def test_gaussian_closed_form_matches_quadrature(self, duration):
        spec = PulseSpec.gaussian(duration, center=3.0)
        for x in np.linspace(-4.0 * duration, 4.0 * duration, 9):
            quad = absorbed_amplitude(spec, float(x))
            closed = absorbed_amplitudes(spec, np.array([x]))[0]
            assert closed == pytest.approx(quad, abs=1e-10)

    def test_gaussian_far_below_pulse_stays_finite(self):
        spec = PulseSpec.gaussian(40.0)
        values = absorbed_amplitudes(spec, np.array([-2000.0, -500.0]))
        assert np.all(np.isfinite(values))
        assert abs(values[0]) < abs(values[1])

    def test_gaussian_matches_riemann_sum(self, gaussian_40):
        brute = brute_force_one_photon(gaussian_40, Side.L, 0.0, n=1_000_000)
        assert absorbed_amplitude(gaussian_40, 0.0) == pytest.approx(brute, abs=1e-8)

    def test_rejects_non_finite_coordinate(self, gaussian_40):
        with pytest.raises(InvalidParameterError):
            absorbed_amplitude(gaussian_40, math.inf)


class TestOnePhotonOutput:
    """Side-resolved detection probabilities"""

    def test_ancilla_transmittance_at_forty(self, gaussian_40):
        result = one_photon_output(gaussian_40)
        assert result.p_R == pytest.approx(0.0049, abs=5e-4)

    def test_broadband_limit(self):
        assert one_photon_output(PulseSpec.gaussian(0.01)).p_R > 0.99

    def test_narrowband_limit(self):
        result = one_photon_output(PulseSpec.gaussian(200.0))
        assert result.p_R < 1e-3
        assert result.p_L > 0.999

    def test_amplitudes_on_the_grid(self, rectangular_20):
        result = one_photon_output(rectangular_20)
        np.testing.assert_allclose(result.amp_L, absorbed_amplitudes(rectangular_20, result.x))
        assert result.probability(Side.L) == result.p_L

    @given(duration=st.floats(min_value=1.0, max_value=100.0))
    @settings(max_examples=10, deadline=None)
    def test_unitarity(self, duration):
        for shape in PulseShape:
            result = one_photon_output(PulseSpec(shape=shape, duration=duration))
            assert abs(result.p_L + result.p_R - 1.0) < 1e-6

    def test_transmittance_decreases_with_duration(self):
        p_R = [one_photon_output(PulseSpec.gaussian(d)).p_R for d in (1, 2, 5, 10, 20, 40, 80)]
        assert all(b < a for a, b in zip(p_R, p_R[1:]))

    def test_output_is_causal(self):
        spec = PulseSpec.rectangular(10.0)
        result = one_photon_output(spec)
        beyond = result.x > spec.upper_edge
        assert np.all(result.amp_L[beyond] == 0.0)
        assert np.all(result.amp_R[beyond] == 0.0)


class TestSpectralCoefficients:

    def test_resonance_reflects(self):
        r, t = spectral_coefficients(0.0)
        assert r == -1.0
        assert t == 0.0

    def test_far_detuned_transmits(self):
        _, t = spectral_coefficients(1e6)
        assert abs(t) == pytest.approx(1.0, abs=1e-12)

    def test_unitarity_on_grid(self):
        r, t = spectral_coefficients(np.linspace(-50.0, 50.0, 1001))
        np.testing.assert_allclose(np.abs(r) ** 2 + np.abs(t) ** 2, 1.0, atol=1e-14)

    @pytest.mark.parametrize("duration", [2.0, 10.0, 40.0])
    def test_frequency_domain_equivalence(self, duration):
        spec = PulseSpec.gaussian(duration)
        assert frequency_domain_transmittance(spec) == pytest.approx(one_photon_output(spec).p_R, abs=1e-5)

    def test_frequency_domain_rectangular(self):
        spec = PulseSpec.rectangular(20.0)
        assert frequency_domain_transmittance(spec) == pytest.approx(one_photon_output(spec).p_R, abs=1e-4)


class TestCavityParams:

    def test_gamma_and_bad_cavity(self):
        params = CavityParams(g=132.0, kappa=528.0)
        assert params.gamma == pytest.approx(33.0)
        assert params.bad_cavity
        assert not CavityParams(g=10.0, kappa=20.0).bad_cavity

    def test_dimensionless_units(self):
        params = CavityParams.dimensionless(10.0)
        assert params.gamma == pytest.approx(1.0)
        assert params.ratio == pytest.approx(10.0)
