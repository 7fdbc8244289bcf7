"""Quadrature on piecewise-uniform meshes

Composite Simpson rules, causal exponential sweeps and adaptive
semi-infinite integrals shared by the scattering services.
"""
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from loguru import logger
from numpy.polynomial.legendre import leggauss
from scipy import integrate, signal

from .errors import ConvergenceError, InvalidParameterError
from .models import Grid

# Gauss-Legendre order for the per-cell sweep weights
_SWEEP_ORDER = 8


@dataclass(frozen=True)
class Mesh:
    """Uniform segments joined at breakpoints.

    Each segment carries an odd number of nodes so composite Simpson applies
    segment by segment. Nodes sitting on an interior breakpoint appear twice,
    once per neighbouring segment, and are evaluated a rounding step inside
    their own segment so one-sided limits are sampled at jumps.
    """

    edges: tuple[float, ...]
    counts: tuple[int, ...]

    @cached_property
    def nodes(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.linspace(a, b, m) for a, b, m in zip(self.edges[:-1], self.edges[1:], self.counts)
        )

    @cached_property
    def slices(self) -> tuple[slice, ...]:
        bounds = np.concatenate(([0], np.cumsum(self.counts)))
        return tuple(slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))

    @cached_property
    def x(self) -> np.ndarray:
        """Evaluation coordinates, non-decreasing"""
        last = len(self.counts) - 1
        parts = []
        for i, seg in enumerate(self.nodes):
            seg = seg.copy()
            if i > 0:
                seg[0] = np.nextafter(seg[0], np.inf)
            if i < last:
                seg[-1] = np.nextafter(seg[-1], -np.inf)
            parts.append(seg)
        return np.concatenate(parts)

    @cached_property
    def weights(self) -> np.ndarray:
        """Composite Simpson weights aligned with ``x``"""
        parts = []
        for seg in self.nodes:
            h = seg[1] - seg[0]
            w = np.full(seg.size, 2.0)
            w[1::2] = 4.0
            w[0] = w[-1] = 1.0
            parts.append(w * h / 3.0)
        return np.concatenate(parts)

    @property
    def size(self) -> int:
        return int(sum(self.counts))

    @property
    def lo(self) -> float:
        return self.edges[0]

    @property
    def hi(self) -> float:
        return self.edges[-1]

    def integrate(self, values: np.ndarray) -> float:
        return float(
            sum(integrate.simpson(values[sl], x=seg) for sl, seg in zip(self.slices, self.nodes))
        )

    def refined(self) -> "Mesh":
        return Mesh(edges=self.edges, counts=tuple(2 * (m - 1) + 1 for m in self.counts))

    def coarsened(self) -> Optional["Mesh"]:
        """Every other node, or None when a segment cannot be halved"""
        if any((m - 1) % 4 for m in self.counts):
            return None
        return Mesh(edges=self.edges, counts=tuple((m - 1) // 2 + 1 for m in self.counts))

    def coarse_indices(self) -> np.ndarray:
        """Indices into ``x`` of the nodes kept by ``coarsened``"""
        return np.concatenate([np.arange(sl.start, sl.stop, 2) for sl in self.slices])

    def sweep(self, values: np.ndarray, rate: float = 0.5) -> np.ndarray:
        """S(x) = integral from lo to x of exp(-rate (x - y)) values(y) dy"""
        out = np.empty(self.size)
        carried = 0.0
        for sl, seg in zip(self.slices, self.nodes):
            f = values[sl]
            h = seg[1] - seg[0]
            forward, backward = _cell_weights(h, rate)
            cells = f.size - 1
            c = np.empty(cells)
            c[:-1] = forward[0] * f[:-2] + forward[1] * f[1:-1] + forward[2] * f[2:]
            c[-1] = backward[0] * f[-3] + backward[1] * f[-2] + backward[2] * f[-1]
            q = math.exp(-rate * h)
            running, _ = signal.lfilter([1.0], [1.0, -q], c, zi=[q * carried])
            out[sl.start] = carried
            out[sl.start + 1:sl.stop] = running
            carried = running[-1]
        return out


def _cell_weights(h: float, rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Weights of exp(-rate (y_{i+1} - y)) against a quadratic interpolant.

    ``forward`` interpolates through nodes i, i+1, i+2; ``backward`` through
    i-1, i, i+1 and is used on the last cell of a segment.
    """
    t, w = leggauss(_SWEEP_ORDER)
    t = (t + 1.0) / 2.0
    kernel = h * np.exp(-rate * h * (1.0 - t)) * w / 2.0
    forward = np.array([
        kernel @ ((t - 1.0) * (t - 2.0) / 2.0),
        kernel @ (-t * (t - 2.0)),
        kernel @ (t * (t - 1.0) / 2.0),
    ])
    backward = np.array([
        kernel @ (t * (t - 1.0) / 2.0),
        kernel @ (-(t + 1.0) * (t - 1.0)),
        kernel @ ((t + 1.0) * t / 2.0),
    ])
    return forward, backward


def build_mesh(lo: float, hi: float, max_spacing: float, breakpoints: Iterable[float] = ()) -> Mesh:
    """Split [lo, hi] at the breakpoints inside it, spacing at most ``max_spacing``"""
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise InvalidParameterError(f"invalid mesh domain [{lo}, {hi}]")
    if not max_spacing > 0:
        raise InvalidParameterError(f"mesh spacing must be positive, got {max_spacing}")
    min_gap = 1e-9 * (hi - lo)
    edges = [lo]
    for b in sorted(float(b) for b in breakpoints):
        if b - edges[-1] > min_gap and hi - b > min_gap:
            edges.append(b)
    edges.append(hi)
    counts = []
    for a, b in zip(edges[:-1], edges[1:]):
        intervals = max(2, math.ceil((b - a) / max_spacing * (1.0 - 1e-12)))
        intervals += intervals % 2
        counts.append(intervals + 1)
    return Mesh(edges=tuple(edges), counts=tuple(counts))


def mesh_for_grid(grid: Grid, breakpoints: Iterable[float] = ()) -> Mesh:
    return build_mesh(grid.lo, grid.hi, grid.spacing, breakpoints)


def doubling_error(coarse: Sequence[float], fine: Sequence[float]) -> float:
    return float(np.max(np.abs(np.asarray(fine, dtype=float) - np.asarray(coarse, dtype=float))))


def require_converged(label: str, estimate: float, error: float, tolerance: float) -> None:
    """Raise ConvergenceError when a doubling check misses its tolerance"""
    logger.debug(f"{label}: estimate={estimate:.12g} error={error:.3g} tol={tolerance:.3g}")
    if not error <= tolerance:
        logger.warning(f"{label} not converged: error {error:.3g} > {tolerance:.3g}")
        raise ConvergenceError(f"{label} did not converge", estimate, error, tolerance)


def adaptive_integral(
    func: Callable[[float], float],
    a: float,
    b: float,
    tolerance: float,
    points: Optional[Sequence[float]] = None,
    limit: int = 200,
) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod integral of ``func`` over [a, b]"""
    if b <= a:
        return 0.0, 0.0
    inner = [p for p in (points or ()) if a < p < b] or None
    value, error, info = integrate.quad(
        func, a, b, epsabs=tolerance * 1e-3, epsrel=tolerance, limit=limit, points=inner, full_output=1
    )[:3]
    if error > tolerance * max(1.0, abs(value)):
        raise ConvergenceError("adaptive quadrature did not converge", value, error, tolerance)
    return float(value), float(error)
