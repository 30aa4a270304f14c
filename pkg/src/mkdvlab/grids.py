"""Uniform grids, quadrature, spectral differentiation and weighted Sobolev norms.

Everything downstream (scattering sweeps, singular-integral solves, the PDE
integrator) lives on uniform grids over a symmetric interval [-H, H) with a
power-of-two point count.  Physical coordinates are always stored explicitly;
no index conventions cross module boundaries.

The weighted norm implemented here is

    ||f||_{i,j} = ( ||w_j f||_2^2 + ||f^(i)||_2^2 )^(1/2),   w_j = 1 + |x|^j,

with the conventions that w_0 = 1 and that the derivative term is dropped for
i = 0 (so the (0, j) case is the plain polynomially weighted L2 norm).
Derivatives are spectral, after a smooth cutoff over the outer 10% of the
domain suppresses periodization wraparound.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

# Worker count handed to scipy.fft; the CLI overrides it via set_fft_workers.
_FFT_WORKERS = 1


def set_fft_workers(n: int) -> None:
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(n))


def fft_workers() -> int:
    return _FFT_WORKERS


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


class GridError(ValueError):
    """Invalid grid construction or use of a point outside the grid support."""


@dataclass(frozen=True)
class _UniformGrid:
    """Uniform grid on [-half_width, half_width), endpoint excluded."""

    half_width: float
    n: int

    def __post_init__(self):
        if self.half_width <= 0:
            raise GridError(f"half_width must be positive, got {self.half_width}")
        if self.n < 16 or not _is_power_of_two(self.n):
            raise GridError(f"point count must be a power of two >= 16, got {self.n}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @cached_property
    def points(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n)

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Angular FFT frequencies matching ``points``."""
        return 2.0 * np.pi * sfft.fftfreq(self.n, d=self.spacing)

    def integrate(self, samples: np.ndarray) -> complex | float:
        """Trapezoid rule; spectrally accurate for decaying/periodic data."""
        return self.spacing * samples.sum(axis=-1)

    def contains(self, point: float) -> bool:
        return -self.half_width <= point <= self.half_width - self.spacing

    def refined(self, factor: int) -> "_UniformGrid":
        return type(self)(self.half_width, self.n * factor)


class SpatialGrid(_UniformGrid):
    """Grid for the physical variable x."""


class SpectralGrid(_UniformGrid):
    """Grid for the spectral variable z; symmetric so z = 0 is a node."""


def edge_window(n: int, fraction: float = 0.1) -> np.ndarray:
    """Smooth cutoff equal to 1 in the core, rolling to 0 over the outer
    ``fraction`` of the samples on each side (C^1 cosine taper)."""
    w = np.ones(n)
    m = int(round(fraction * n))
    if m > 0:
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(m) / m))
        w[:m] = ramp
        w[-m:] = ramp[::-1]
    return w


def spectral_derivative(
    grid: _UniformGrid,
    samples: np.ndarray,
    order: int = 1,
    window_fraction: float = 0.1,
) -> np.ndarray:
    """FFT derivative of periodicized data, with edge windowing.

    The Nyquist mode is zeroed for odd orders (it carries no usable phase).
    """
    f = np.asarray(samples, dtype=complex)
    if window_fraction > 0:
        f = f * edge_window(grid.n, window_fraction)
    k = grid.frequencies.copy()
    if order % 2 == 1:
        k[grid.n // 2] = 0.0
    mult = (1j * k) ** order
    return sfft.ifft(mult * sfft.fft(f, workers=_FFT_WORKERS), workers=_FFT_WORKERS)


@dataclass(frozen=True)
class WeightedNorm:
    """Value of the H^{i,j} norm of a sampled function."""

    deriv_order: int
    weight_order: int
    value: float

    def __post_init__(self):
        if self.value < 0 or not np.isfinite(self.value):
            raise ValueError(f"weighted norm must be finite and nonnegative, got {self.value}")

    def __float__(self) -> float:
        return self.value


def weighted_norm(
    grid: _UniformGrid,
    samples: np.ndarray,
    deriv_order: int = 0,
    weight_order: int = 0,
) -> WeightedNorm:
    """H^{i,j} norm by trapezoid quadrature; deterministic for a fixed grid."""
    f = np.asarray(samples)
    if not np.all(np.isfinite(f.view(float) if np.iscomplexobj(f) else f)):
        raise ValueError("weighted_norm: non-finite samples rejected")
    x = grid.points
    w = np.ones_like(x) if weight_order == 0 else 1.0 + np.abs(x) ** weight_order
    total = grid.integrate(np.abs(w * f) ** 2)
    if deriv_order > 0:
        df = spectral_derivative(grid, f, order=deriv_order)
        total = total + grid.integrate(np.abs(df) ** 2)
    return WeightedNorm(deriv_order, weight_order, float(np.sqrt(total)))


class Interpolant:
    """Evaluates sampled data off the grid nodes.

    method='cubic' uses a not-a-knot cubic spline (exact on cubics); method=
    'spectral' evaluates the trigonometric interpolant and is preferable only
    for data that is genuinely periodic on the grid.  The method used is kept
    on the instance so downstream results can record it.
    """

    def __init__(self, grid: _UniformGrid, samples: np.ndarray, method: str = "cubic"):
        if method not in ("cubic", "spectral"):
            raise ValueError(f"unknown interpolation method {method!r}")
        self.grid = grid
        self.method = method
        f = np.asarray(samples, dtype=complex)
        if method == "cubic":
            from scipy.interpolate import CubicSpline

            self._spline = CubicSpline(grid.points, f)
        else:
            self._coeff = sfft.fft(f, workers=_FFT_WORKERS) / grid.n

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        lo = -self.grid.half_width
        hi = self.grid.half_width - self.grid.spacing
        if np.any(pts < lo) or np.any(pts > hi):
            raise GridError(
                f"interpolation point outside grid support [{lo}, {hi}]"
            )
        if self.method == "cubic":
            return self._spline(pts)
        k = self.grid.frequencies
        phase = np.exp(1j * np.outer(pts + self.grid.half_width, k))
        return phase @ self._coeff


def interpolate(grid: _UniformGrid, samples: np.ndarray, point, method: str = "cubic"):
    """One-shot interpolation; see Interpolant for the method contract."""
    return Interpolant(grid, samples, method=method)(point)
