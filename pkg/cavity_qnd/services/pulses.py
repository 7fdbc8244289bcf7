"""Pulse Service - input wave-packets

Normalized single-photon pulses in the co-moving coordinate, their
spectra and the sampling grids every scattering computation runs on.
"""
import math
from typing import Union

import numpy as np
from loguru import logger
from scipy import special

from ..config import get_settings
from ..errors import InvalidParameterError
from ..models import Grid, PulseShape, PulseSpec
from ..quadrature import Mesh, mesh_for_grid

settings = get_settings()

ArrayLike = Union[float, np.ndarray]


class PulseService:
    """Amplitudes, spectra and grids for Gaussian and rectangular pulses"""

    def amplitude(self, spec: PulseSpec, x: float) -> float:
        """Pulse amplitude at a single coordinate"""
        if not math.isfinite(x):
            raise InvalidParameterError(f"coordinate must be finite, got {x}")
        return float(self.amplitudes(spec, np.asarray(x, dtype=float)))

    def amplitudes(self, spec: PulseSpec, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if spec.shape is PulseShape.GAUSSIAN:
            peak = math.sqrt(2.0 / (spec.duration * math.sqrt(math.pi)))
            return peak * np.exp(-2.0 * (x - spec.center) ** 2 / spec.duration**2)
        inside = (x >= spec.lower_edge) & (x <= spec.upper_edge)
        return np.where(inside, 1.0 / math.sqrt(spec.duration), 0.0)

    def spectrum(self, spec: PulseSpec, k: ArrayLike) -> np.ndarray:
        """Fourier amplitude (1/sqrt(2 pi)) * integral of pulse(x) exp(-i k x) dx"""
        k = np.asarray(k, dtype=float)
        phase = np.exp(-1j * k * spec.center)
        d = spec.duration
        if spec.shape is PulseShape.GAUSSIAN:
            peak = math.sqrt(2.0 / (d * math.sqrt(math.pi)))
            return peak * d / 2.0 * np.exp(-(k**2) * d**2 / 8.0) * phase
        return math.sqrt(d / (2.0 * math.pi)) * np.sinc(k * d / (2.0 * math.pi)) * phase

    def breakpoints(self, spec: PulseSpec) -> tuple[float, ...]:
        if spec.shape is PulseShape.RECTANGULAR:
            return spec.lower_edge, spec.upper_edge
        return ()

    def cumulative_mass(self, spec: PulseSpec, y: ArrayLike) -> np.ndarray:
        """Probability of the pulse below coordinate y"""
        y = np.asarray(y, dtype=float)
        if spec.shape is PulseShape.GAUSSIAN:
            return 0.5 * special.erfc(2.0 * (spec.center - y) / spec.duration)
        return np.clip((y - spec.lower_edge) / spec.duration, 0.0, 1.0)

    def tail_mass(self, spec: PulseSpec, lo: float, hi: float) -> float:
        """Probability outside [lo, hi]"""
        if spec.shape is PulseShape.GAUSSIAN:
            below = 0.5 * special.erfc(2.0 * (spec.center - lo) / spec.duration)
            above = 0.5 * special.erfc(2.0 * (hi - spec.center) / spec.duration)
            return float(below + above)
        return float(1.0 - self.cumulative_mass(spec, hi) + self.cumulative_mass(spec, lo))

    def default_grid(self, spec_s: PulseSpec, spec_a: PulseSpec) -> Grid:
        """Domain wide enough for both pulses and the exp(-x/2) output tails"""
        d_max = max(spec_s.duration, spec_a.duration)
        d_min = min(spec_s.duration, spec_a.duration)
        half = settings.grid_tail_factor * d_max + settings.grid_margin
        lo = min(spec_s.center, spec_a.center) - half
        hi = max(spec_s.center, spec_a.center) + half
        spacing = min(settings.max_spacing, d_min / settings.spacing_per_duration)
        n = math.ceil((hi - lo) / spacing) + 1
        logger.debug(f"default grid [{lo}, {hi}] n={n} spacing<={spacing:.4g}")
        return Grid(lo=lo, hi=hi, n=n)

    def mesh(self, grid: Grid, *specs: PulseSpec) -> Mesh:
        """Grid split at every pulse discontinuity"""
        cuts = [b for spec in specs for b in self.breakpoints(spec)]
        return mesh_for_grid(grid, cuts)

    def norm(self, spec: PulseSpec, grid: Grid) -> float:
        mesh = self.mesh(grid, spec)
        return mesh.integrate(self.amplitudes(spec, mesh.x) ** 2)


# Global service instance
pulse_service = PulseService()

pulse_amplitude = pulse_service.amplitude
pulse_amplitudes = pulse_service.amplitudes
pulse_spectrum = pulse_service.spectrum
breakpoints = pulse_service.breakpoints
default_grid = pulse_service.default_grid
build_mesh = pulse_service.mesh
norm = pulse_service.norm
