"""Metrics Service - QND efficiency and success probability

The ancilla heralds the signal by being transmitted (R). With photon 1 the
ancilla and photon 2 the signal:

    P_suc = p[RR] + p[RL]
    EQND  = P_suc / (P1_R(ancilla) + P_suc)
"""
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np
from loguru import logger
from scipy import integrate, optimize

from ..config import get_settings
from ..errors import BracketError, ConvergenceError, InvalidParameterError
from ..models import (
    Channel,
    ConditionalShape,
    DurationMode,
    EfficiencyPlateau,
    Grid,
    PhysicalScenario,
    PulseShape,
    PulseSpec,
    QndMetrics,
    Side,
    WeakLightSpec,
)
from .one_photon import one_photon_service
from .two_photon import two_photon_service

settings = get_settings()

HERALD_CHANNELS = (Channel.RR, Channel.RL)


class MetricsService:
    """Figures of merit, sweeps and heralded pulse shapes"""

    def qnd_metrics(
        self,
        d_signal: float,
        d_ancilla: float,
        shape: PulseShape = PulseShape.GAUSSIAN,
        grid: Optional[Grid] = None,
        include_nonlinear: bool = True,
    ) -> QndMetrics:
        """EQND and P_suc for one pair of pulse durations"""
        self._check_durations(d_signal, d_ancilla)
        ancilla = PulseSpec(shape=shape, duration=d_ancilla)
        signal = PulseSpec(shape=shape, duration=d_signal)

        two = two_photon_service.probabilities(ancilla, signal, grid, include_nonlinear=include_nonlinear)
        one = one_photon_service.output(ancilla, grid)
        p_suc = float(np.clip(sum(two.probability(c) for c in HERALD_CHANNELS), 0.0, 1.0))

        metrics = QndMetrics.from_probabilities(
            d_signal=d_signal,
            d_ancilla=d_ancilla,
            p_suc=p_suc,
            p1R_ancilla=one.p_R,
            error_estimate=max(two.error_estimate, one.error_estimate),
        )
        logger.debug(
            f"qnd d_s={d_signal:g} d_a={d_ancilla:g}: p_suc={metrics.p_suc:.6f} "
            f"p1R={metrics.p1R_ancilla:.6f} eqnd={metrics.eqnd:.6f}"
        )
        return metrics

    def success_probability(
        self, d_signal: float, d_ancilla: float, shape: PulseShape = PulseShape.GAUSSIAN
    ) -> float:
        self._check_durations(d_signal, d_ancilla)
        two = two_photon_service.probabilities(
            PulseSpec(shape=shape, duration=d_ancilla), PulseSpec(shape=shape, duration=d_signal)
        )
        return sum(two.probability(c) for c in HERALD_CHANNELS)

    def find_duration_for_success(
        self,
        target: float,
        mode: DurationMode = DurationMode.SYMMETRIC,
        d_ancilla: Optional[float] = None,
        shape: PulseShape = PulseShape.GAUSSIAN,
        bracket: tuple[float, float] = (10.0, 80.0),
        tolerance: Optional[float] = None,
    ) -> tuple[float, QndMetrics]:
        """Duration whose success probability equals ``target``.

        Symmetric mode: both pulses share the duration and P_suc falls
        monotonically as it grows, so ``bracket`` is widened within
        [min_duration, max_duration] until it encloses the target.

        Asymmetric mode: the ancilla stays at ``d_ancilla`` (40/Gamma unless
        given) and only the signal varies. P_suc then rises to a maximum near
        d_signal ~ d_ancilla/3 and falls again; the search starts at that
        maximum and returns the root on the falling branch, the longer signal
        with the higher efficiency. Targets above the maximum raise
        BracketError without widening anything.
        """
        if not 0.0 < target < 1.0:
            raise InvalidParameterError(f"target success probability must lie in (0, 1), got {target}")
        tol = tolerance if tolerance is not None else settings.tol_root
        fixed = d_ancilla if d_ancilla is not None else settings.asymmetric_ancilla
        lo_limit, hi_limit = settings.min_duration, settings.max_duration

        def residual(d: float) -> float:
            ancilla = d if mode is DurationMode.SYMMETRIC else fixed
            return self.success_probability(d, ancilla, shape) - target

        if mode is DurationMode.ASYMMETRIC:
            peak = optimize.minimize_scalar(
                lambda d: -residual(d), bounds=(lo_limit, fixed), method="bounded", options={"xatol": 1e-2}
            )
            lo, f_lo = float(peak.x), float(-peak.fun)
            logger.debug(f"asymmetric P_suc peaks at {target + f_lo:.6f} for d_signal={lo:.4f}")
            if f_lo < 0:
                raise BracketError(
                    f"P_suc = {target} exceeds the maximum {target + f_lo:.6f} reached at d_signal = {lo:g}",
                    estimate=target + f_lo,
                    error_bound=-f_lo,
                    tolerance=tol,
                )
            hi = max(bracket[1], lo)
        else:
            lo, hi = bracket
            f_lo = residual(lo)
        f_hi = residual(hi)

        expansions = 0
        while f_lo < 0 or f_hi > 0:
            pinned = (f_lo < 0 and lo <= lo_limit) or (f_hi > 0 and hi >= hi_limit)
            if pinned or expansions >= settings.max_bracket_expansions:
                raise BracketError(
                    f"could not bracket P_suc = {target} within [{lo:g}, {hi:g}]",
                    estimate=f_lo + target,
                    error_bound=min(abs(f_lo), abs(f_hi)),
                    tolerance=tol,
                )
            expansions += 1
            if f_lo < 0:
                lo = max(lo / 2.0, lo_limit)
                f_lo = residual(lo)
            if f_hi > 0:
                hi = min(hi * 2.0, hi_limit)
                f_hi = residual(hi)
        logger.debug(f"bracket [{lo:g}, {hi:g}] after {expansions} expansions")

        root, result = optimize.brentq(
            residual,
            lo,
            hi,
            xtol=1e-6,
            rtol=1e-10,
            maxiter=settings.max_root_iterations,
            full_output=True,
            disp=False,
        )
        f_root = residual(root)
        if not result.converged or abs(f_root) > tol:
            raise ConvergenceError(f"root search stopped at d={root:g}", f_root + target, abs(f_root), tol)

        logger.info(f"P_suc={target} reached at d={root:.6f} after {result.iterations} iterations")
        ancilla = root if mode is DurationMode.SYMMETRIC else fixed
        return root, self.qnd_metrics(root, ancilla, shape)

    def weak_light_metrics(self, base: QndMetrics, weak: WeakLightSpec) -> QndMetrics:
        """Ancilla as vacuum plus one photon with probability weight w"""
        w = weak.one_photon_weight
        flags = base.flags
        if w == 0.0:
            eqnd = math.nan
            flags = flags + ("no one-photon ancilla component: efficiency undefined",)
        else:
            eqnd = base.eqnd
        return QndMetrics(
            d_signal=base.d_signal,
            d_ancilla=base.d_ancilla,
            p_suc=w * base.p_suc,
            p1R_ancilla=w * base.p1R_ancilla,
            eqnd=eqnd,
            weight=base.weight * w,
            error_estimate=w * base.error_estimate,
            flags=flags,
        )

    def conditional_signal_shape(
        self,
        d_signal: float,
        d_ancilla: float,
        x_detect: float,
        shape: PulseShape = PulseShape.RECTANGULAR,
        channel: Channel = Channel.RR,
        window: float = 12.0,
        n: int = 481,
    ) -> ConditionalShape:
        """Signal amplitude at x_detect + delta given an ancilla click at x_detect"""
        self._check_durations(d_signal, d_ancilla)
        if not math.isfinite(x_detect):
            raise InvalidParameterError(f"detection coordinate must be finite, got {x_detect}")
        if min(d_signal, d_ancilla) < 10.0:
            logger.warning("conditional shape assumes both pulses much longer than 1/Gamma")
        ancilla = PulseSpec(shape=shape, duration=d_ancilla)
        signal = PulseSpec(shape=shape, duration=d_signal)

        delta = np.linspace(-window, window, n)
        x2 = x_detect + delta
        herald = one_photon_service.output_amplitudes(ancilla, np.array([x_detect]))
        herald = herald[0 if channel.side1 is Side.L else 1][0]
        sig_L, sig_R = one_photon_service.output_amplitudes(signal, x2)
        partner = sig_L if channel.side2 is Side.L else sig_R
        m = np.maximum(x_detect, x2)
        absorbed = one_photon_service.absorbed_amplitudes
        correlation = absorbed(ancilla, m) * absorbed(signal, m)
        raw = herald * partner - np.exp(-0.5 * np.abs(delta)) * correlation

        weight = integrate.simpson(raw**2, x=delta)
        if not math.sqrt(weight) > 1e-8 / math.sqrt(d_signal * d_ancilla):
            raise InvalidParameterError(f"x_detect={x_detect} lies outside the heralded amplitude")
        aleph = 1.0 / weight
        amplitude = raw * math.sqrt(aleph)
        amplitude *= np.sign(amplitude[np.argmax(np.abs(amplitude))])

        return ConditionalShape(
            d_signal=d_signal,
            d_ancilla=d_ancilla,
            x_detect=x_detect,
            channel=channel,
            delta=delta,
            amplitude=amplitude,
            aleph=aleph,
            decay_rate=self.fit_decay_rate(delta, amplitude),
        )

    @staticmethod
    def fit_decay_rate(delta: np.ndarray, amplitude: np.ndarray, skip: float = 0.5) -> float:
        """Rate of exp(-rate |delta|) by a log-linear fit over both wings"""
        mask = (np.abs(delta) >= skip) & (amplitude > 1e-12 * np.max(amplitude))
        if np.count_nonzero(mask) < 2:
            raise InvalidParameterError("too few samples to fit a decay rate")
        slope, _ = np.polyfit(np.abs(delta[mask]), np.log(amplitude[mask]), 1)
        return float(-slope)

    def physical_scenario(self, scenario: PhysicalScenario) -> QndMetrics:
        """Metrics for laboratory rates and pulse durations"""
        flags = []
        if not scenario.bad_cavity:
            flags.append(f"kappa < 4g ({scenario.kappa_hz:g} < {4 * scenario.g_hz:g} GHz): not a bad cavity")
        if scenario.exceeds_decoherence_bound:
            flags.append(
                f"pulse {scenario.pulse_seconds:g} s exceeds half the decoherence time "
                f"{scenario.decoherence_seconds:g} s"
            )
        for flag in flags:
            logger.warning(flag)
        logger.info(
            f"scenario Gamma={scenario.gamma_hz:g} GHz d={scenario.d:g} d_signal={scenario.d_signal:g} "
            f"({scenario.mode.value})"
        )
        metrics = self.qnd_metrics(scenario.d_signal, scenario.d)
        return metrics.model_copy(update={"flags": tuple(flags) + (scenario.convention,)})

    def sweep(
        self,
        mode: DurationMode,
        d_values: Sequence[float],
        d_ancilla_fixed: Optional[float] = None,
        shape: PulseShape = PulseShape.GAUSSIAN,
        grid: Optional[Grid] = None,
    ) -> list[QndMetrics]:
        """Metrics per duration, returned in input order"""
        values = [float(d) for d in d_values]
        if not values:
            raise InvalidParameterError("sweep needs at least one duration")
        if any(not d > 0 for d in values):
            raise InvalidParameterError("sweep durations must be positive")
        if any(b < a for a, b in zip(values, values[1:])):
            raise InvalidParameterError("sweep durations must be sorted")
        fixed = d_ancilla_fixed if d_ancilla_fixed is not None else settings.asymmetric_ancilla

        def point(d: float) -> QndMetrics:
            ancilla = d if mode is DurationMode.SYMMETRIC else fixed
            return self.qnd_metrics(d, ancilla, shape, grid)

        with ThreadPoolExecutor(max_workers=settings.max_workers) as pool:
            results = list(pool.map(point, values))
        logger.info(f"{mode.value} sweep over {len(values)} durations done")
        return results

    def efficiency_plateau(
        self,
        d_ancilla: Optional[float] = None,
        d_min: float = 5.0,
        d_max: float = 40.0,
        points: int = 8,
        threshold: float = 0.9,
    ) -> EfficiencyPlateau:
        """EQND across signal durations with the ancilla fixed"""
        fixed = d_ancilla if d_ancilla is not None else settings.asymmetric_ancilla
        d_values = np.linspace(d_min, d_max, points).tolist()
        report = EfficiencyPlateau(
            d_ancilla=fixed,
            threshold=threshold,
            points=self.sweep(DurationMode.ASYMMETRIC, d_values, fixed),
        )
        if report.holds:
            logger.info(f"EQND >= {threshold} for d_signal in [{d_min:g}, {d_max:g}] (min {report.min_eqnd:.4f})")
        else:
            logger.warning(f"EQND drops to {report.min_eqnd:.4f} below {threshold} in [{d_min:g}, {d_max:g}]")
        return report

    @staticmethod
    def _check_durations(*durations: float) -> None:
        if not all(math.isfinite(d) and d > 0 for d in durations):
            raise InvalidParameterError(f"pulse durations must be positive, got {durations}")


# Global service instance
metrics_service = MetricsService()

qnd_metrics = metrics_service.qnd_metrics
find_duration_for_success = metrics_service.find_duration_for_success
weak_light_metrics = metrics_service.weak_light_metrics
conditional_signal_shape = metrics_service.conditional_signal_shape
physical_scenario = metrics_service.physical_scenario
sweep = metrics_service.sweep
efficiency_plateau = metrics_service.efficiency_plateau
