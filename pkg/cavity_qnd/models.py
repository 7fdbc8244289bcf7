"""Pydantic models for pulses, scattering results and QND metrics"""
import math
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from .config import get_settings


# ===========================================
# PULSES & GRIDS
# ===========================================

class PulseShape(str, Enum):
    GAUSSIAN = "gaussian"
    RECTANGULAR = "rectangular"


class PulseSpec(BaseModel):
    """Normalized single-photon input wave-packet in the co-moving frame"""
    model_config = ConfigDict(frozen=True)

    shape: PulseShape = PulseShape.GAUSSIAN
    duration: float = Field(..., gt=0.0, allow_inf_nan=False, description="Pulse duration d in units of 1/Gamma")
    center: float = Field(default=0.0, allow_inf_nan=False, description="Pulse center, co-moving coordinate")

    @classmethod
    def gaussian(cls, duration: float, center: float = 0.0) -> "PulseSpec":
        return cls(shape=PulseShape.GAUSSIAN, duration=duration, center=center)

    @classmethod
    def rectangular(cls, duration: float, center: float = 0.0) -> "PulseSpec":
        return cls(shape=PulseShape.RECTANGULAR, duration=duration, center=center)

    @property
    def lower_edge(self) -> float:
        return self.center - self.duration / 2

    @property
    def upper_edge(self) -> float:
        return self.center + self.duration / 2

    @property
    def extent(self) -> tuple[float, float]:
        """Interval holding all but ~1e-16 of the pulse's probability"""
        if self.shape is PulseShape.RECTANGULAR:
            return self.lower_edge, self.upper_edge
        return self.center - 3 * self.duration, self.center + 3 * self.duration


class Grid(BaseModel):
    """Uniform sampling of the co-moving coordinate"""
    model_config = ConfigDict(frozen=True)

    lo: float = Field(..., allow_inf_nan=False)
    hi: float = Field(..., allow_inf_nan=False)
    n: int = Field(..., ge=2)

    @model_validator(mode="after")
    def _check_order(self) -> "Grid":
        if not self.lo < self.hi:
            raise ValueError(f"grid requires lo < hi, got [{self.lo}, {self.hi}]")
        return self

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / (self.n - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    def refined(self) -> "Grid":
        """Same domain with the spacing halved"""
        return Grid(lo=self.lo, hi=self.hi, n=2 * (self.n - 1) + 1)


# ===========================================
# ONE-PHOTON SCATTERING
# ===========================================

class Side(str, Enum):
    L = "L"
    R = "R"


class CavityParams(BaseModel):
    """Atom-cavity rates; any consistent unit"""
    model_config = ConfigDict(frozen=True)

    g: float = Field(..., gt=0.0, allow_inf_nan=False, description="Atom-cavity coupling")
    kappa: float = Field(..., gt=0.0, allow_inf_nan=False, description="Cavity decay rate per mirror")

    @classmethod
    def dimensionless(cls, ratio: float) -> "CavityParams":
        """Rates in units of Gamma for a given kappa/g"""
        return cls(g=ratio, kappa=ratio**2)

    @computed_field
    @property
    def gamma(self) -> float:
        return self.g**2 / self.kappa

    @property
    def ratio(self) -> float:
        return self.kappa / self.g

    @property
    def bad_cavity(self) -> bool:
        return self.kappa >= 4 * self.g


class OnePhotonResult(BaseModel):
    """Side-resolved output of a single scattered photon"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: PulseSpec
    x: np.ndarray
    amp_L: np.ndarray
    amp_R: np.ndarray
    p_L: float = Field(..., ge=0.0, le=1.0)
    p_R: float = Field(..., ge=0.0, le=1.0)
    error_estimate: float = 0.0

    def probability(self, side: Side) -> float:
        return self.p_L if side is Side.L else self.p_R


# ===========================================
# TWO-PHOTON SCATTERING
# ===========================================

class Channel(str, Enum):
    """Output sides of (photon 1 = ancilla, photon 2 = signal)"""
    LL = "LL"
    LR = "LR"
    RL = "RL"
    RR = "RR"

    @classmethod
    def from_sides(cls, side1: Side, side2: Side) -> "Channel":
        return cls(side1.value + side2.value)

    @property
    def side1(self) -> Side:
        return Side(self.value[0])

    @property
    def side2(self) -> Side:
        return Side(self.value[1])

    @property
    def swapped(self) -> "Channel":
        return Channel(self.value[::-1])


class TwoPhotonResult(BaseModel):
    """Channel probabilities plus the factors the output surface is built from"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec1: PulseSpec
    spec2: PulseSpec
    x: np.ndarray
    ancilla_amps: dict[Side, np.ndarray]
    signal_amps: dict[Side, np.ndarray]
    correlation: np.ndarray = Field(..., description="Product of both absorbed amplitudes")
    probabilities: dict[Channel, float]
    error_estimate: float = 0.0
    include_nonlinear: bool = True
    method: str = "reduced"

    def probability(self, channel: Channel) -> float:
        return self.probabilities[channel]

    @property
    def total(self) -> float:
        return float(sum(self.probabilities.values()))

    def surface(self, channel: Channel, stride: int = 1) -> np.ndarray:
        """Output amplitude on the (x1, x2) mesh, rows indexed by x1"""
        idx = np.arange(0, self.x.size, stride)
        xs = self.x[idx]
        out = np.outer(self.ancilla_amps[channel.side1][idx], self.signal_amps[channel.side2][idx])
        if self.include_nonlinear:
            peak = self.correlation[np.maximum.outer(idx, idx)]
            out -= np.exp(-0.5 * np.abs(np.subtract.outer(xs, xs))) * peak
        return out


# ===========================================
# QND METRICS
# ===========================================

class QndMetrics(BaseModel):
    """Efficiency and success probability for one (signal, ancilla) pair"""
    model_config = ConfigDict(frozen=True)

    d_signal: float = Field(..., gt=0.0)
    d_ancilla: float = Field(..., gt=0.0)
    p_suc: float = Field(..., ge=0.0, le=1.0)
    p1R_ancilla: float = Field(..., ge=0.0, le=1.0)
    eqnd: float = Field(..., description="NaN when no ancilla can herald")
    weight: float = Field(default=1.0, ge=0.0, le=1.0, description="One-photon weight of the ancilla input")
    error_estimate: float = 0.0
    flags: tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check_eqnd(self) -> "QndMetrics":
        if not (math.isnan(self.eqnd) or 0.0 <= self.eqnd <= 1.0):
            raise ValueError(f"eqnd must lie in [0, 1], got {self.eqnd}")
        return self

    @classmethod
    def from_probabilities(
        cls, d_signal: float, d_ancilla: float, p_suc: float, p1R_ancilla: float, **extra
    ) -> "QndMetrics":
        heralds = p1R_ancilla + p_suc
        eqnd = p_suc / heralds if heralds > 0 else math.nan
        return cls(
            d_signal=d_signal,
            d_ancilla=d_ancilla,
            p_suc=p_suc,
            p1R_ancilla=p1R_ancilla,
            eqnd=eqnd,
            **extra,
        )

    @property
    def degenerate(self) -> bool:
        return math.isnan(self.eqnd)


class WeakLightSpec(BaseModel):
    """Ancilla prepared as vacuum plus a weighted one-photon component"""
    model_config = ConfigDict(frozen=True)

    one_photon_weight: float = Field(..., ge=0.0, le=1.0)


class DurationMode(str, Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


class PhysicalScenario(BaseModel):
    """Laboratory rates (GHz) and pulse durations (seconds)"""
    model_config = ConfigDict(frozen=True)

    g_hz: float = Field(..., gt=0.0, description="Coupling g in GHz")
    kappa_hz: float = Field(..., gt=0.0, description="Cavity decay kappa in GHz")
    pulse_seconds: float = Field(..., gt=0.0, description="Ancilla pulse duration")
    signal_seconds: Optional[float] = Field(default=None, gt=0.0, description="Signal duration; symmetric when unset")
    decoherence_seconds: float = Field(
        default_factory=lambda: get_settings().decoherence_seconds, gt=0.0, description="Exciton decoherence time"
    )

    @computed_field
    @property
    def gamma_hz(self) -> float:
        return self.g_hz**2 / self.kappa_hz

    @computed_field
    @property
    def d(self) -> float:
        return self.gamma_hz * 1e9 * self.pulse_seconds

    @property
    def d_signal(self) -> float:
        if self.signal_seconds is None:
            return self.d
        return self.gamma_hz * 1e9 * self.signal_seconds

    @property
    def mode(self) -> DurationMode:
        return DurationMode.SYMMETRIC if self.signal_seconds is None else DurationMode.ASYMMETRIC

    @property
    def bad_cavity(self) -> bool:
        return self.kappa_hz >= 4 * self.g_hz

    @property
    def exceeds_decoherence_bound(self) -> bool:
        return self.pulse_seconds > self.decoherence_seconds / 2

    @property
    def convention(self) -> str:
        return "d = Gamma[GHz] * 1e9 * duration[s]; rates used as given, no 2*pi factor"


class ConditionalShape(BaseModel):
    """Heralded signal amplitude versus delay from the ancilla click"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    d_signal: float
    d_ancilla: float
    x_detect: float
    channel: Channel
    delta: np.ndarray
    amplitude: np.ndarray
    aleph: float = Field(..., gt=0.0, description="Normalization constant of the slice")
    decay_rate: float


class EfficiencyPlateau(BaseModel):
    """EQND over a range of signal durations at fixed ancilla"""
    model_config = ConfigDict(frozen=True)

    d_ancilla: float
    threshold: float
    points: list[QndMetrics]

    @property
    def min_eqnd(self) -> float:
        return min(m.eqnd for m in self.points)

    @property
    def holds(self) -> bool:
        return self.min_eqnd >= self.threshold

    @property
    def p_suc_range(self) -> tuple[float, float]:
        values = [m.p_suc for m in self.points]
        return min(values), max(values)


# ===========================================
# FULL-MODEL ORACLE
# ===========================================

class FullModelState(BaseModel):
    """Finite-kappa one-photon state after the pulse has scattered"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: CavityParams
    spec: PulseSpec
    t_final: float
    excited_amp: complex
    cavity_amp: complex
    k_grid: np.ndarray
    field_L: np.ndarray
    field_R: np.ndarray
    x: np.ndarray = Field(..., description="Co-moving coordinate of the outgoing samples")
    out_L: np.ndarray
    out_R: np.ndarray
    norm_history: np.ndarray
    max_norm_drift: float
    p_L: float
    p_R: float
    error_estimate: float = 0.0
    substeps: int = 1

    @property
    def k_spacing(self) -> float:
        return float(self.k_grid[1] - self.k_grid[0])

    @property
    def norm(self) -> float:
        fields = (np.sum(np.abs(self.field_L) ** 2) + np.sum(np.abs(self.field_R) ** 2)) * self.k_spacing
        return float(abs(self.excited_amp) ** 2 + abs(self.cavity_amp) ** 2 + fields)


# ===========================================
# CLI
# ===========================================

class Command(str, Enum):
    TRANSMITTANCE = "transmittance"
    METRICS = "metrics"
    SWEEP = "sweep"
    SHAPE = "shape"
    ORACLE_CHECK = "oracle-check"
    FIND_DURATION = "find-duration"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class RunConfig(BaseModel):
    """Fully merged command-line and config-file settings"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    command: Command
    d: list[float] = Field(default_factory=lambda: [40.0], description="Durations for transmittance and sweep")
    d_signal: float = Field(default=40.0, gt=0.0)
    d_ancilla: Optional[float] = Field(default=None, gt=0.0)
    shape: PulseShape = PulseShape.GAUSSIAN
    mode: DurationMode = DurationMode.SYMMETRIC
    x_detect: float = 0.0
    window: float = Field(default=12.0, gt=0.0)
    weight: float = Field(default=1.0, ge=0.0, le=1.0)
    grid_lo: Optional[float] = None
    grid_hi: Optional[float] = None
    grid_n: Optional[int] = Field(default=None, ge=2)
    tol_1d: Optional[float] = Field(default=None, gt=0.0)
    tol_2d: Optional[float] = Field(default=None, gt=0.0)
    tol_root: Optional[float] = Field(default=None, gt=0.0)
    target: float = Field(default=0.10, gt=0.0, lt=1.0, description="Success probability to reach")
    duration: float = Field(default=40.0, gt=0.0, description="Pulse duration of the full-model check")
    kappa_ratio: float = Field(default=10.0, gt=0.0)
    points: int = Field(default=20, ge=1)
    seed: int = 0
    format: OutputFormat = OutputFormat.CSV
    output: Optional[Path] = None
    log_level: Optional[str] = None

    @field_validator("d", mode="before")
    @classmethod
    def _split_durations(cls, value):
        if isinstance(value, str):
            return [item for item in value.replace(" ", "").split(",") if item]
        if isinstance(value, (int, float)):
            return [value]
        return value

    @field_validator("d")
    @classmethod
    def _positive_durations(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("at least one duration is required")
        if any(not math.isfinite(v) or v <= 0 for v in value):
            raise ValueError("durations must be positive and finite")
        return value

    @model_validator(mode="after")
    def _check_grid(self) -> "RunConfig":
        overrides = (self.grid_lo, self.grid_hi, self.grid_n)
        if any(v is not None for v in overrides) and any(v is None for v in overrides):
            raise ValueError("grid_lo, grid_hi and grid_n must be given together")
        if self.grid_lo is not None and not self.grid_lo < self.grid_hi:
            raise ValueError("grid_lo must be below grid_hi")
        return self

    def grid(self) -> Optional[Grid]:
        if self.grid_n is None:
            return None
        return Grid(lo=self.grid_lo, hi=self.grid_hi, n=self.grid_n)
