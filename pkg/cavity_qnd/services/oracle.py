"""Oracle Service - independent reference computations

Two checks on the effective theory:

* the finite-kappa one-photon dynamics of the full atom-cavity-field
  model, which the effective kernels approximate for pulses much longer
  than 1/kappa;
* brute-force Riemann sums of the two-photon kernel integrals, with no
  use of their separable closed forms.

The full model is stepped in time. Eliminating the field modes leaves
the atom and cavity amplitudes driven by the incoming pulse at the mirror
(c = Gamma = 1, g and kappa in units of Gamma):

    dPhi/dt    = -i g Lambda
    dLambda/dt = -i g Phi - 2 kappa Lambda - sqrt(2 kappa) pulse(x_top - t)

and the outgoing fields follow from the input-output relations

    out_L = -pulse - sqrt(2 kappa) Lambda,   out_R = -sqrt(2 kappa) Lambda

The time lattice has the Nyquist spacing pi/K of the requested k-grid, so
the outgoing mode amplitudes on that grid are an exact discrete Fourier
transform of the sampled fields.

The field modes enter linearly and carry a single excitation, so the
elimination is exact and gives the same mode amplitudes as stepping all
2n+2 coupled amplitudes. The recovered modes satisfy Parseval against
p_R, and the norm history tracks conservation across the run.
"""
import math
from typing import Optional

import numpy as np
from loguru import logger
from scipy import integrate, signal

from ..config import get_settings
from ..errors import ConvergenceError, InvalidParameterError, NormDriftError, ResolutionError
from ..models import CavityParams, Channel, FullModelState, PulseShape, PulseSpec, Side
from .one_photon import one_photon_service
from .pulses import pulse_service

settings = get_settings()

MIN_BRUTE_FORCE_POINTS = 1000


class OracleService:
    """Full-model propagation and brute-force kernel quadrature"""

    # ===========================================
    # FULL MODEL
    # ===========================================

    def full_model_propagate(
        self,
        params: CavityParams,
        spec: PulseSpec,
        t_final: Optional[float] = None,
        k_cutoff: Optional[float] = None,
        n_modes: Optional[int] = None,
        tolerance: Optional[float] = None,
    ) -> FullModelState:
        """Scatter one photon off the cavity with finite kappa"""
        g = params.g / params.gamma
        kappa = params.kappa / params.gamma
        if not params.bad_cavity:
            logger.warning(f"kappa/g = {params.ratio:g} is outside the bad-cavity regime kappa >= 4g")
        tol = tolerance if tolerance is not None else settings.tol_oracle
        d = spec.duration
        x_bottom, x_top = spec.extent
        needed = x_top - x_bottom + settings.oracle_tail

        t_final = needed if t_final is None else t_final
        if t_final < needed:
            raise ResolutionError(f"t_final={t_final:g} does not cover the pulse and its decay ({needed:g})")
        min_cutoff = max(20.0 / d, 10.0 * kappa)
        k_cutoff = max(min_cutoff, 20.0) if k_cutoff is None else k_cutoff
        if k_cutoff < min_cutoff:
            raise ResolutionError(f"k_cutoff={k_cutoff:g} below max(20/d, 10 kappa) = {min_cutoff:g}")
        dt = math.pi / k_cutoff
        samples = int(math.floor(t_final / dt)) + 1
        if n_modes is None:
            n_modes = 1 << math.ceil(math.log2(max(20.0 * k_cutoff * d, samples)))
        dk = 2.0 * k_cutoff / n_modes
        if dk > 0.1 / d:
            raise ResolutionError(f"k spacing {dk:.3g} exceeds 0.1/d = {0.1 / d:.3g}; raise n_modes")
        if samples > n_modes:
            raise ResolutionError(f"t_final={t_final:g} exceeds the k-grid period {n_modes * dt:g}")

        logger.debug(f"full model g={g:g} kappa={kappa:g} K={k_cutoff:g} modes={n_modes} samples={samples}")
        substeps = 1 << max(0, math.ceil(math.log2(2.0 * kappa * dt)))
        previous, error = None, math.inf
        for _ in range(settings.max_step_halvings + 1):
            atom, cavity, drive = self._integrate(g, kappa, spec, x_top, dt, samples, substeps)
            out_L = -drive - math.sqrt(2.0 * kappa) * cavity
            out_R = -math.sqrt(2.0 * kappa) * cavity
            if previous is not None:
                error = float(max(np.max(np.abs(out_L - previous[0])), np.max(np.abs(out_R - previous[1]))))
                logger.debug(f"substeps={substeps}: output change {error:.3g}")
                if error <= tol:
                    break
            previous = (out_L, out_R)
            substeps *= 2
        else:
            raise ConvergenceError("full-model integration did not converge", None, error, tol)

        t = dt * np.arange(samples)
        flux = np.abs(out_L) ** 2 + np.abs(out_R) ** 2
        emitted = integrate.cumulative_trapezoid(flux, dx=dt, initial=0.0)
        waiting = pulse_service.cumulative_mass(spec, x_top - t)
        norm_history = np.abs(atom) ** 2 + np.abs(cavity) ** 2 + emitted + waiting
        drift = float(np.max(np.abs(norm_history - 1.0)))
        if drift > settings.max_norm_drift:
            raise NormDriftError("full-model norm drifted", float(norm_history[-1]), drift, settings.max_norm_drift)

        k_grid = -k_cutoff + dk * np.arange(n_modes)
        field_L = self._to_modes(out_L, dt, k_grid, t_final)
        field_R = self._to_modes(out_R, dt, k_grid, t_final)
        p_L = float(dt * np.sum(np.abs(out_L) ** 2))
        p_R = float(dt * np.sum(np.abs(out_R) ** 2))
        logger.info(f"full model kappa/g={params.ratio:g} d={d:g}: p_L={p_L:.8f} p_R={p_R:.8f} drift={drift:.2e}")

        return FullModelState(
            params=params,
            spec=spec,
            t_final=t_final,
            excited_amp=complex(atom[-1]),
            cavity_amp=complex(cavity[-1]),
            k_grid=k_grid,
            field_L=field_L,
            field_R=field_R,
            x=(x_top - t)[::-1],
            out_L=out_L[::-1],
            out_R=out_R[::-1],
            norm_history=norm_history,
            max_norm_drift=drift,
            p_L=p_L,
            p_R=p_R,
            error_estimate=error,
            substeps=substeps,
        )

    def effective_deviation(self, params: CavityParams, spec: PulseSpec, **kwargs) -> float:
        """L2 distance between full-model and effective outgoing amplitudes"""
        state = self.full_model_propagate(params, spec, **kwargs)
        eff_L, eff_R = one_photon_service.output_amplitudes(spec, state.x)
        dx = float(state.x[1] - state.x[0])
        residual = np.abs(state.out_L - eff_L) ** 2 + np.abs(state.out_R - eff_R) ** 2
        return float(math.sqrt(dx * np.sum(residual)))

    def _integrate(
        self, g: float, kappa: float, spec: PulseSpec, x_top: float, dt: float, samples: int, substeps: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Classical RK4 on (Phi, Lambda), sampled every dt"""
        h = dt / substeps
        steps = substeps * (samples - 1)
        A = np.array([[0.0, -1j * g], [-1j * g, -2.0 * kappa]])
        u = np.array([0.0, -math.sqrt(2.0 * kappa)], dtype=complex)

        # RK4 of a linear system is an affine map; read it off unit inputs
        zero = np.zeros(2, dtype=complex)
        M = np.column_stack([_rk4_step(A, u, h, e, 0.0, 0.0, 0.0) for e in np.eye(2, dtype=complex)])
        P = _rk4_step(A, u, h, zero, 1.0, 0.0, 0.0)
        Q = _rk4_step(A, u, h, zero, 0.0, 1.0, 0.0)
        S = _rk4_step(A, u, h, zero, 0.0, 0.0, 1.0)

        drive = pulse_service.amplitudes(spec, x_top - 0.5 * h * np.arange(2 * steps + 1))
        forcing = (
            np.outer(drive[0:-1:2], P) + np.outer(drive[1::2], Q) + np.outer(drive[2::2], S)
        )
        eigenvalues, V = np.linalg.eig(M)
        states = np.zeros((steps + 1, 2), dtype=complex)
        if np.linalg.cond(V) < 1e8:
            modal = np.linalg.solve(V, forcing.T)
            z = np.vstack([signal.lfilter([1.0], [1.0, -lam], row) for lam, row in zip(eigenvalues, modal)])
            states[1:] = (V @ z).T
        else:
            for i in range(steps):
                states[i + 1] = M @ states[i] + forcing[i]
        sampled = states[::substeps]
        return sampled[:, 0], sampled[:, 1], drive[:: 2 * substeps]

    @staticmethod
    def _to_modes(out: np.ndarray, dt: float, k_grid: np.ndarray, t_final: float) -> np.ndarray:
        """psi(k) = -(1/sqrt(2 pi)) exp(-i k T) * integral exp(i k t) out(t) dt"""
        n_modes = k_grid.size
        alternating = out * np.where(np.arange(out.size) % 2 == 0, 1.0, -1.0)
        padded = np.zeros(n_modes, dtype=complex)
        padded[: out.size] = alternating
        transform = n_modes * np.fft.ifft(padded)
        return -dt / math.sqrt(2.0 * math.pi) * np.exp(-1j * k_grid * t_final) * transform

    # ===========================================
    # BRUTE FORCE
    # ===========================================

    def brute_force_absorbed(self, spec: PulseSpec, x: float, n: int = 4000) -> float:
        """Midpoint sum for psi_abs(x)"""
        start, top = self._kernel_range(spec, x)
        if top <= start:
            return 0.0
        h = (top - start) / n
        s = start + (np.arange(n) + 0.5) * h
        return float(-0.5 * h * np.sum(np.exp(-0.5 * (s - x)) * pulse_service.amplitudes(spec, s)))

    def brute_force_one_photon(self, spec: PulseSpec, side: Side, x: float, n: int = 4000) -> float:
        absorbed = self.brute_force_absorbed(spec, x, n)
        if side is Side.L:
            return absorbed
        return pulse_service.amplitude(spec, x) + absorbed

    def brute_force_two_photon(
        self,
        spec1: PulseSpec,
        spec2: PulseSpec,
        channel: Channel,
        x1: float,
        x2: float,
        n: int = 4000,
        linear: bool = True,
        nonlinear: bool = True,
        block: int = 512,
    ) -> float:
        """Two-photon amplitude by direct double Riemann sums"""
        if n < MIN_BRUTE_FORCE_POINTS:
            raise InvalidParameterError(f"brute force needs n >= {MIN_BRUTE_FORCE_POINTS} per axis, got {n}")
        total = 0.0
        if linear:
            total += self.brute_force_one_photon(spec1, channel.side1, x1, n) * self.brute_force_one_photon(
                spec2, channel.side2, x2, n
            )
        if nonlinear:
            m = max(x1, x2)
            k1 = self._weighted_samples(spec1, m, x1, n)
            k2 = self._weighted_samples(spec2, m, x2, n)
            double = 0.0
            for start in range(0, k1.size, block):
                double += float(np.sum(np.outer(k1[start:start + block], k2)))
            total -= 0.25 * double
        return total

    def _weighted_samples(self, spec: PulseSpec, lower: float, origin: float, n: int) -> np.ndarray:
        """Midpoint samples of exp(-(x' - origin)/2) pulse(x') h over [lower, top]"""
        start, top = self._kernel_range(spec, lower)
        if top <= start:
            return np.zeros(0)
        h = (top - start) / n
        s = start + (np.arange(n) + 0.5) * h
        return np.exp(-0.5 * (s - origin)) * pulse_service.amplitudes(spec, s) * h

    @staticmethod
    def _kernel_range(spec: PulseSpec, x: float) -> tuple[float, float]:
        if spec.shape is PulseShape.RECTANGULAR:
            return max(x, spec.lower_edge), spec.upper_edge
        return x, spec.center + 4.0 * spec.duration


def _rk4_step(
    A: np.ndarray, u: np.ndarray, h: float, y: np.ndarray, b0: float, b_half: float, b1: float
) -> np.ndarray:
    k1 = A @ y + u * b0
    k2 = A @ (y + 0.5 * h * k1) + u * b_half
    k3 = A @ (y + 0.5 * h * k2) + u * b_half
    k4 = A @ (y + h * k3) + u * b1
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Global service instance
oracle_service = OracleService()

full_model_propagate = oracle_service.full_model_propagate
effective_deviation = oracle_service.effective_deviation
brute_force_one_photon = oracle_service.brute_force_one_photon
brute_force_two_photon = oracle_service.brute_force_two_photon
