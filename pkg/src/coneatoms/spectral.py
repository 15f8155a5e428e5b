"""Uniform grids on V, their Fourier duals, and frequency partitions of unity.

The Fourier transform is unitary, ``f^(w) = (2 pi)^(-n/2) int f(x) e^{-i<x,w>} dx``,
discretized on a centered spatial grid ``x_q = q dx`` and a frequency grid
``w_p = center + p dw`` (``q, p`` integers in ``[-N/2, N/2)``), with
``dx dw N = 2 pi`` on each axis. Arrays are stored in centered order.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import cones

__all__ = [
    "FrequencyGrid",
    "GridFunction",
    "SpectralWindow",
    "Partition",
    "GridMismatchError",
    "CoveringError",
    "bump",
    "build_partition",
    "window_convolve",
    "sharp_projection",
    "interval_indicator",
    "worker_count",
]


def worker_count():
    """FFT worker count, capped by ``CONEATOMS_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("CONEATOMS_THREADS", "1")))
    except ValueError:
        return 1


class GridMismatchError(ValueError):
    pass


class CoveringError(ValueError):
    pass


def bump(s):
    """Smooth compact bump ``exp(1 - 1/(1 - s^2))`` on ``|s| < 1``, zero elsewhere."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Frequency box ``center +- L`` per axis with ``N`` points per axis.

    Parameters
    ----------
    n : int
        Dimension.
    N : int
        Points per axis, a power of two.
    L : array_like
        Half-width of the frequency box per axis.
    center : array_like
        Center of the frequency box.
    """

    n: int
    N: int
    L: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two, got {self.N}")
        L = np.broadcast_to(np.asarray(self.L, dtype=float), (self.n,)).copy()
        c = np.broadcast_to(np.asarray(self.center, dtype=float), (self.n,)).copy()
        if np.any(L <= 0):
            raise ValueError("L must be positive")
        L.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "center", c)

    @classmethod
    def from_box(cls, lo, hi, N):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        return cls(len(lo), N, (hi - lo) / 2, (hi + lo) / 2)

    def __eq__(self, other):
        return (
            isinstance(other, FrequencyGrid)
            and self.n == other.n
            and self.N == other.N
            and np.array_equal(self.L, other.L)
            and np.array_equal(self.center, other.center)
        )

    __hash__ = None

    def refined(self, factor=2):
        """Same box, ``factor`` times more points per axis."""
        return FrequencyGrid(self.n, self.N * factor, self.L, self.center)

    @property
    def shape(self):
        return (self.N,) * self.n

    @property
    def dw(self):
        return 2 * self.L / self.N

    @property
    def dx(self):
        return math.pi / self.L

    @property
    def cell_w(self):
        return float(np.prod(self.dw))

    @property
    def cell_x(self):
        return float(np.prod(self.dx))

    @property
    def index_range(self):
        return np.arange(self.N) - self.N // 2

    def freq_axes(self):
        k = self.index_range
        return [self.center[a] + k * self.dw[a] for a in range(self.n)]

    def space_axes(self):
        k = self.index_range
        return [k * self.dx[a] for a in range(self.n)]

    def frequencies(self):
        """All frequency points, shape ``shape + (n,)``."""
        return np.stack(np.meshgrid(*self.freq_axes(), indexing="ij"), axis=-1)

    def positions(self):
        return np.stack(np.meshgrid(*self.space_axes(), indexing="ij"), axis=-1)

    def flat_frequencies(self, flat_index):
        """Frequencies at flat (C-order) indices without building the full grid."""
        idx = np.unravel_index(np.asarray(flat_index), self.shape)
        return np.stack(
            [self.center[a] + (idx[a] - self.N // 2) * self.dw[a] for a in range(self.n)],
            axis=-1,
        )

    def _modulation(self, sign):
        # e^{sign * i <center, x>} as a separable product
        out = np.ones(self.shape, dtype=complex)
        for a, xa in enumerate(self.space_axes()):
            shape = [1] * self.n
            shape[a] = self.N
            out = out * np.exp(sign * 1j * self.center[a] * xa).reshape(shape)
        return out

    def forward(self, samples):
        """Spatial samples -> spectrum."""
        samples = np.asarray(samples, dtype=complex)
        axes = tuple(range(-self.n, 0))
        g = samples * self._modulation(-1)
        spec = sfft.fftshift(
            sfft.fftn(sfft.ifftshift(g, axes=axes), axes=axes, workers=worker_count()), axes=axes
        )
        return spec * (self.cell_x / (2 * math.pi) ** (self.n / 2))

    def inverse(self, spectrum):
        """Spectrum -> spatial samples."""
        spectrum = np.asarray(spectrum, dtype=complex)
        axes = tuple(range(-self.n, 0))
        g = sfft.fftshift(
            sfft.ifftn(sfft.ifftshift(spectrum, axes=axes), axes=axes, workers=worker_count()),
            axes=axes,
        )
        scale = self.N**self.n * self.cell_w / (2 * math.pi) ** (self.n / 2)
        return g * scale * self._modulation(+1)

    def omega_mask(self, cone):
        """Frequency points inside the open cone."""
        return cones.contains(cone, self.frequencies())

    def to_dict(self):
        return {"N": self.N, "L": self.L.tolist(), "center": self.center.tolist()}


class GridFunction:
    """A function on the spatial grid, stored through samples and/or spectrum.

    Either representation is computed from the other on first access.
    """

    def __init__(self, grid, samples=None, spectrum=None):
        if samples is None and spectrum is None:
            raise ValueError("need samples or spectrum")
        self.grid = grid
        self._samples = None if samples is None else np.asarray(samples, dtype=complex)
        self._spectrum = None if spectrum is None else np.asarray(spectrum, dtype=complex)
        for arr in (self._samples, self._spectrum):
            if arr is not None and arr.shape != grid.shape:
                raise GridMismatchError(f"array shape {arr.shape} != grid shape {grid.shape}")

    @classmethod
    def from_spectrum(cls, grid, spectrum):
        return cls(grid, spectrum=spectrum)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, spectrum=np.zeros(grid.shape, dtype=complex))

    @property
    def samples(self):
        if self._samples is None:
            self._samples = self.grid.inverse(self._spectrum)
        return self._samples

    @property
    def spectrum(self):
        if self._spectrum is None:
            self._spectrum = self.grid.forward(self._samples)
        return self._spectrum

    @property
    def band_support(self):
        """Bounding box ``(lo, hi)`` of nonzero spectrum, or ``None``."""
        nz = np.nonzero(self.spectrum)
        if len(nz[0]) == 0:
            return None
        w = self.grid.flat_frequencies(np.ravel_multi_index(nz, self.grid.shape))
        return w.min(axis=0), w.max(axis=0)

    def _check(self, other):
        if self.grid != other.grid:
            raise GridMismatchError("functions live on different grids")

    def __add__(self, other):
        self._check(other)
        return GridFunction(self.grid, spectrum=self.spectrum + other.spectrum)

    def __sub__(self, other):
        self._check(other)
        return GridFunction(self.grid, spectrum=self.spectrum - other.spectrum)

    def __mul__(self, scalar):
        return GridFunction(self.grid, spectrum=self.spectrum * scalar)

    __rmul__ = __mul__

    def norm(self, p=2.0):
        """Riemann-sum ``L^p`` norm over the spatial grid."""
        vals = np.abs(self.samples)
        if p == 2:
            return math.sqrt(float(np.sum(vals**2)) * self.grid.cell_x)
        return float(np.sum(vals**p) * self.grid.cell_x) ** (1.0 / p)

    def spectral_norm(self):
        return math.sqrt(float(np.sum(np.abs(self.spectrum) ** 2)) * self.grid.cell_w)

    def inner(self, other):
        """``<self, other>``, linear in the first slot."""
        self._check(other)
        return complex(np.vdot(other.spectrum, self.spectrum)) * self.grid.cell_w


@dataclass(frozen=True, eq=False)
class SpectralWindow:
    """Sparse values of one partition function on the frequency grid."""

    j: int
    center: np.ndarray
    radius: float
    index: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def dense(self, grid):
        out = np.zeros(grid.N**grid.n)
        out[self.index] = self.values
        return out.reshape(grid.shape)


@dataclass(frozen=True, eq=False)
class Partition:
    cone: cones.ConeDescriptor
    grid: FrequencyGrid
    lattice: object
    windows: list
    interior_mask: np.ndarray = field(repr=False)

    def total(self):
        """``sum_j psi_j`` accumulated in index order."""
        out = np.zeros(self.grid.N**self.grid.n)
        for win in self.windows:
            out[win.index] += win.values
        return out.reshape(self.grid.shape)

    def unity_defect(self):
        tot = self.total()
        return float(np.max(np.abs(tot[self.interior_mask] - 1.0)))


def build_partition(cone, lattice, grid, radius=2.0, check_region=True):
    """Normalized smooth bumps ``psi_j = b_j / sum_k b_k`` on the frequency grid.

    ``b_j(w) = bump(distance(w, x_j) / radius)`` on grid points of the cone.
    The interior mask collects points where the bump sum is positive.

    Raises
    ------
    CoveringError
        If a grid point of the lattice region (shrunk by the covering
        radius) is not reached by any bump.
    """
    if grid.n != cone.n:
        raise GridMismatchError("grid dimension does not match the cone")
    w_all = grid.frequencies().reshape(-1, cone.n)
    in_cone = np.flatnonzero(cones.contains(cone, w_all))
    w = w_all[in_cone]
    total = np.zeros(len(w))
    raw = []
    for j, xj in enumerate(lattice.points):
        d = cones.distance(cone, xj, w)
        hit = np.flatnonzero(d < radius)
        vals = bump(d[hit] / radius)
        keep = vals > 0
        hit, vals = hit[keep], vals[keep]
        total[hit] += vals
        raw.append((j, xj, hit, vals))
    covered = total > 0
    if check_region:
        target = lattice.region.contains(cone, w, margin=lattice.covering_radius)
        if np.any(target & ~covered):
            raise CoveringError("grid points of the region are not covered by any window")
    windows = []
    for j, xj, hit, vals in raw:
        vals = vals / total[hit]
        keep = vals > 0  # subnormal bumps can vanish after normalization
        windows.append(SpectralWindow(j, np.asarray(xj), radius, in_cone[hit[keep]], vals[keep]))
    mask = np.zeros(len(w_all), dtype=bool)
    mask[in_cone[covered]] = True
    return Partition(cone, grid, lattice, windows, mask.reshape(grid.shape))


def window_convolve(f, window):
    """``f * psi_j``: multiply the spectrum by the window."""
    spec = np.zeros(f.grid.N**f.grid.n, dtype=complex)
    flat = f.spectrum.reshape(-1)
    spec[window.index] = flat[window.index] * window.values
    return GridFunction(f.grid, spectrum=spec.reshape(f.grid.shape))


def sharp_projection(f, partition):
    """``sum_j f * psi_j``."""
    if f.grid != partition.grid:
        raise GridMismatchError("function and partition live on different grids")
    return GridFunction(f.grid, spectrum=f.spectrum * partition.total())


def interval_indicator(grid, a, b):
    """Sampled ``1_[a, b]`` on a 1-d frequency grid, ``1/2`` at grid points hitting an endpoint.

    The half values make the Riemann sum of the indicator agree with the
    trapezoid rule, so integrals of smooth functions over ``[a, b]``
    converge at second order.
    """
    if grid.n != 1:
        raise ValueError("interval_indicator is one-dimensional")
    w = grid.freq_axes()[0]
    tol = 1e-9 * grid.dw[0]
    out = ((w > a + tol) & (w < b - tol)).astype(float)
    out[np.abs(w - a) <= tol] = 0.5
    out[np.abs(w - b) <= tol] = 0.5
    return out
