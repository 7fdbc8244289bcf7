"""Two-Photon Service - linear scattering plus the blockade correction

Photon 1 is the ancilla, photon 2 the signal. Each output channel jk is

    Psi_jk(x1, x2) = a1_j(x1) * a2_k(x2) + N(x1, x2)
    N(x1, x2)      = -exp(-|x1 - x2| / 2) * psi_abs1(m) * psi_abs2(m),  m = max(x1, x2)

where a_L = psi_abs and a_R = pulse + psi_abs are the one-photon outputs.
N removes the amplitude for both photons being absorbed at once and is
the same on all four channels.

Channel probabilities are reduced to one-dimensional integrals. With
G = psi_abs1 * psi_abs2 and S[f](x) = int_lo^x exp(-(x - y)/2) f(y) dy,

    p_jk = P1_j * P2_k + 2 C_jk + Q
    C_jk = -int a1_j G S[a2_k] - int a2_k G S[a1_j]
    Q    = 2 int G(m)^2 (1 - exp(-(m - lo))) dm

The literal surface integral stays available as ``method="surface"``.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
from loguru import logger

from ..config import get_settings
from ..errors import InvalidParameterError
from ..models import Channel, Grid, PulseSpec, Side, TwoPhotonResult
from ..quadrature import Mesh, doubling_error, require_converged
from .one_photon import one_photon_service
from .pulses import pulse_service

settings = get_settings()

METHODS = ("reduced", "surface")


class TwoPhotonService:
    """Two-photon output amplitudes and channel probabilities"""

    def __init__(self, tile_rows: int = 256):
        self.tile_rows = tile_rows

    def nonlinear_amplitude(self, spec1: PulseSpec, spec2: PulseSpec, x1: float, x2: float) -> float:
        self._check_finite(x1, x2)
        m = np.array([max(x1, x2)])
        peak = one_photon_service.absorbed_amplitudes(spec1, m) * one_photon_service.absorbed_amplitudes(spec2, m)
        return float(-math.exp(-0.5 * abs(x1 - x2)) * peak[0])

    def amplitude(
        self,
        spec1: PulseSpec,
        spec2: PulseSpec,
        channel: Channel,
        x1: float,
        x2: float,
        include_nonlinear: bool = True,
    ) -> float:
        """Output amplitude of one channel at (x1, x2)"""
        self._check_finite(x1, x2)
        a1 = self._side_amplitude(spec1, channel.side1, x1)
        a2 = self._side_amplitude(spec2, channel.side2, x2)
        linear = a1 * a2
        if not include_nonlinear:
            return linear
        return linear + self.nonlinear_amplitude(spec1, spec2, x1, x2)

    def probabilities(
        self,
        spec1: PulseSpec,
        spec2: PulseSpec,
        grid: Optional[Grid] = None,
        method: str = "reduced",
        include_nonlinear: bool = True,
        tolerance: Optional[float] = None,
    ) -> TwoPhotonResult:
        """Probabilities of the four output channels with a doubling check"""
        if method not in METHODS:
            raise InvalidParameterError(f"unknown method {method!r}, expected one of {METHODS}")
        grid = grid if grid is not None else pulse_service.default_grid(spec2, spec1)
        tol = tolerance if tolerance is not None else settings.tol_2d
        mesh = pulse_service.mesh(grid, spec1, spec2)
        factors = self._factors(spec1, spec2, mesh)

        if method == "reduced":
            coarse = self._reduced(factors, mesh, include_nonlinear)
            fine = self._reduced(self._factors(spec1, spec2, mesh.refined()), mesh.refined(), include_nonlinear)
        else:
            half = mesh.coarsened()
            if half is not None:
                keep = mesh.coarse_indices()
                coarse = self._surface({k: v[keep] for k, v in factors.items()}, half, include_nonlinear)
                fine = self._surface(factors, mesh, include_nonlinear)
            else:
                coarse = self._surface(factors, mesh, include_nonlinear)
                fine = self._surface(self._factors(spec1, spec2, mesh.refined()), mesh.refined(), include_nonlinear)

        channels = list(Channel)
        error = doubling_error([coarse[c] for c in channels], [fine[c] for c in channels])
        require_converged(
            f"two-photon probabilities d1={spec1.duration:g} d2={spec2.duration:g} ({method})",
            sum(fine.values()),
            error,
            tol,
        )
        logger.debug(
            "two-photon " + " ".join(f"{c.value}={fine[c]:.8f}" for c in channels) + f" n={mesh.size}"
        )
        return TwoPhotonResult(
            spec1=spec1,
            spec2=spec2,
            x=mesh.x,
            ancilla_amps={Side.L: factors["A_L"], Side.R: factors["A_R"]},
            signal_amps={Side.L: factors["B_L"], Side.R: factors["B_R"]},
            correlation=factors["G"],
            probabilities={c: float(np.clip(fine[c], 0.0, 1.0)) for c in channels},
            error_estimate=error,
            include_nonlinear=include_nonlinear,
            method=method,
        )

    def _factors(self, spec1: PulseSpec, spec2: PulseSpec, mesh: Mesh) -> dict[str, np.ndarray]:
        a_L, a_R = one_photon_service.output_amplitudes(spec1, mesh.x)
        b_L, b_R = one_photon_service.output_amplitudes(spec2, mesh.x)
        return {"A_L": a_L, "A_R": a_R, "B_L": b_L, "B_R": b_R, "G": a_L * b_L}

    def _reduced(self, f: dict[str, np.ndarray], mesh: Mesh, include_nonlinear: bool) -> dict[Channel, float]:
        ancilla = {s: f[f"A_{s.value}"] for s in Side}
        signal = {s: f[f"B_{s.value}"] for s in Side}
        p1 = {s: mesh.integrate(a**2) for s, a in ancilla.items()}
        p2 = {s: mesh.integrate(b**2) for s, b in signal.items()}
        if not include_nonlinear:
            return {c: p1[c.side1] * p2[c.side2] for c in Channel}

        G = f["G"]
        blocked = 2.0 * mesh.integrate(G**2 * -np.expm1(-(mesh.x - mesh.lo)))
        swept_a = {s: mesh.sweep(a) for s, a in ancilla.items()}
        swept_b = {s: mesh.sweep(b) for s, b in signal.items()}
        out = {}
        for c in Channel:
            a, b = ancilla[c.side1], signal[c.side2]
            cross = -mesh.integrate(a * G * swept_b[c.side2]) - mesh.integrate(b * G * swept_a[c.side1])
            out[c] = p1[c.side1] * p2[c.side2] + 2.0 * cross + blocked
        return out

    def _surface(self, f: dict[str, np.ndarray], mesh: Mesh, include_nonlinear: bool) -> dict[Channel, float]:
        x, w, G = mesh.x, mesh.weights, f["G"]
        cols = np.arange(x.size)
        starts = range(0, x.size, self.tile_rows)

        def tile(start: int) -> np.ndarray:
            rows = np.arange(start, min(start + self.tile_rows, x.size))
            if include_nonlinear:
                kernel = np.exp(-0.5 * np.abs(x[rows, None] - x[None, :]))
                nonlinear = -kernel * G[np.maximum(rows[:, None], cols[None, :])]
            else:
                nonlinear = 0.0
            sums = np.empty(len(Channel))
            for i, c in enumerate(Channel):
                values = np.outer(f[f"A_{c.side1.value}"][rows], f[f"B_{c.side2.value}"]) + nonlinear
                sums[i] = w[rows] @ (values**2 @ w)
            return sums

        with ThreadPoolExecutor(max_workers=settings.max_workers) as pool:
            total = np.sum(list(pool.map(tile, starts)), axis=0)
        return {c: float(total[i]) for i, c in enumerate(Channel)}

    @staticmethod
    def _side_amplitude(spec: PulseSpec, side: Side, x: float) -> float:
        amp_L, amp_R = one_photon_service.output_amplitudes(spec, np.array([x]))
        return float((amp_L if side is Side.L else amp_R)[0])

    @staticmethod
    def _check_finite(*coords: float) -> None:
        if not all(math.isfinite(c) for c in coords):
            raise InvalidParameterError(f"coordinates must be finite, got {coords}")


# Global service instance
two_photon_service = TwoPhotonService()

nonlinear_amplitude = two_photon_service.nonlinear_amplitude
two_photon_amplitude = two_photon_service.amplitude
two_photon_probabilities = two_photon_service.probabilities
