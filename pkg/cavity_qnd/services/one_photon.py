"""One-Photon Service - effective single-photon scattering

A photon entering from the left either passes the cavity untouched or is
absorbed by the atom and re-emitted into both sides with the kernel
-(1/2) exp(-(x' - x)/2), x < x'. In units Gamma = c = 1:

    amp_L(x) = psi_abs(x)
    amp_R(x) = pulse(x) + psi_abs(x)
"""
import math
from typing import Optional, Union

import numpy as np
from loguru import logger
from scipy import special

from ..config import get_settings
from ..errors import InvalidParameterError
from ..models import Grid, OnePhotonResult, PulseShape, PulseSpec
from ..quadrature import Mesh, adaptive_integral, doubling_error, require_converged
from .pulses import pulse_service

settings = get_settings()


class OnePhotonService:
    """Effective one-photon kernels and side-resolved detection probabilities"""

    def absorbed_amplitude(self, spec: PulseSpec, x: float, tolerance: Optional[float] = None) -> float:
        """psi_abs(x) by adaptive quadrature of the re-emission kernel"""
        if not math.isfinite(x):
            raise InvalidParameterError(f"coordinate must be finite, got {x}")
        tol = tolerance if tolerance is not None else settings.tol_1d
        if spec.shape is PulseShape.RECTANGULAR:
            start, stop, points = max(0.0, spec.lower_edge - x), spec.upper_edge - x, None
        else:
            start, stop, points = 0.0, spec.center + 5.0 * spec.duration - x, [spec.center - x]
        if stop <= start:
            return 0.0

        def integrand(s: float) -> float:
            return math.exp(-0.5 * s) * pulse_service.amplitude(spec, x + s)

        value, _ = adaptive_integral(integrand, start, stop, tol, points=points)
        return -0.5 * value

    def absorbed_amplitudes(self, spec: PulseSpec, x: np.ndarray) -> np.ndarray:
        """Closed-form psi_abs on an array of coordinates"""
        x = np.asarray(x, dtype=float)
        d = spec.duration
        if spec.shape is PulseShape.RECTANGULAR:
            lo, hi = spec.lower_edge, spec.upper_edge
            capped = np.minimum(x, hi)
            inner = np.exp(-0.5 * (np.maximum(lo, capped) - capped)) - np.exp(-0.5 * (hi - capped))
            return np.where(x >= hi, 0.0, -inner / math.sqrt(d))

        x0 = x - spec.center
        peak = math.sqrt(2.0 / (d * math.sqrt(math.pi)))
        scale = peak * d * math.sqrt(math.pi) / (4.0 * math.sqrt(2.0))
        z = math.sqrt(2.0) * (x0 + d**2 / 8.0) / d
        out = np.empty_like(x0)
        # erfcx keeps exp(z^2) erfc(z) finite where the Gaussian factor underflows
        upper = z >= 0
        out[upper] = np.exp(-2.0 * x0[upper] ** 2 / d**2) * special.erfcx(z[upper])
        lower = ~upper
        out[lower] = np.exp(0.5 * x0[lower] + d**2 / 32.0) * special.erfc(z[lower])
        return -scale * out

    def output_amplitudes(self, spec: PulseSpec, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        absorbed = self.absorbed_amplitudes(spec, x)
        return absorbed, pulse_service.amplitudes(spec, x) + absorbed

    def output(
        self, spec: PulseSpec, grid: Optional[Grid] = None, tolerance: Optional[float] = None
    ) -> OnePhotonResult:
        """Sampled output amplitudes and detection probabilities on both sides"""
        grid = grid if grid is not None else pulse_service.default_grid(spec, spec)
        tol = tolerance if tolerance is not None else settings.tol_1d
        mesh = pulse_service.mesh(grid, spec)

        amp_L, amp_R = self.output_amplitudes(spec, mesh.x)
        coarse = (mesh.integrate(amp_L**2), mesh.integrate(amp_R**2))
        fine = self._probabilities(spec, mesh.refined())
        error = doubling_error(coarse, fine)
        require_converged(f"one-photon probabilities d={spec.duration:g}", fine[1], error, tol)

        # Richardson step for the fourth-order Simpson rule
        p_L, p_R = ((16.0 * f - c) / 15.0 for f, c in zip(fine, coarse))
        logger.debug(f"one-photon d={spec.duration:g}: p_L={p_L:.10f} p_R={p_R:.10f} n={mesh.size}")
        return OnePhotonResult(
            spec=spec,
            x=mesh.x,
            amp_L=amp_L,
            amp_R=amp_R,
            p_L=float(np.clip(p_L, 0.0, 1.0)),
            p_R=float(np.clip(p_R, 0.0, 1.0)),
            error_estimate=error,
        )

    def _probabilities(self, spec: PulseSpec, mesh: Mesh) -> tuple[float, float]:
        amp_L, amp_R = self.output_amplitudes(spec, mesh.x)
        return mesh.integrate(amp_L**2), mesh.integrate(amp_R**2)

    def spectral_coefficients(self, k: Union[float, np.ndarray]) -> tuple:
        """Reflection and transmission coefficients (r, t) at detuning k"""
        k_arr = np.asarray(k, dtype=float)
        if not np.all(np.isfinite(k_arr)):
            raise InvalidParameterError("wave number must be finite")
        denominator = 0.5 + 1j * k_arr
        r = -0.5 / denominator
        t = 1j * k_arr / denominator
        if k_arr.ndim == 0:
            return complex(r), complex(t)
        return r, t

    def frequency_domain_transmittance(self, spec: PulseSpec, tolerance: Optional[float] = None) -> float:
        """p_R as the integral of |t(k)|^2 |pulse(k)|^2 over k"""
        tol = tolerance if tolerance is not None else settings.tol_1d

        def integrand(k: float) -> float:
            weight = k * k / (k * k + 0.25)
            return weight * abs(complex(pulse_service.spectrum(spec, k))) ** 2

        d = spec.duration
        if spec.shape is PulseShape.GAUSSIAN:
            value, _ = adaptive_integral(integrand, 0.0, 12.0 / d, tol, points=[0.5, 2.0 / d])
            return 2.0 * value
        # sinc^2 spectrum: integrate through many lobes, add the 1/k^2 tail analytically
        cutoff = 400.0 * math.pi / d
        lobes = [2.0 * math.pi * j / d for j in range(1, 200)]
        value, _ = adaptive_integral(integrand, 0.0, cutoff, tol, points=lobes, limit=2000)
        return 2.0 * value + 2.0 / (math.pi * d * cutoff)


# Global service instance
one_photon_service = OnePhotonService()

absorbed_amplitude = one_photon_service.absorbed_amplitude
absorbed_amplitudes = one_photon_service.absorbed_amplitudes
one_photon_output = one_photon_service.output
spectral_coefficients = one_photon_service.spectral_coefficients
frequency_domain_transmittance = one_photon_service.frequency_domain_transmittance
