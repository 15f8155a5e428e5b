"""Atomic decompositions on the Besov side and their extension to the tube.

Atoms are ``abs_det(h)^(-1/2) psi(h^{-1}(x - x_i))`` for group elements
``h_j = factorize(y_j)`` over a cone lattice and spatial points ``x_i`` on
an axis-aligned sublattice of the spatial grid. On the frequency side an
atom is the level spectrum ``g_j(w) = s_j abs_det(h_j)^(1/2) psi^(h_j^T w)``
times ``exp(-i <x_i, w>)``, with ``s_j`` a discrete renormalization
(``s_j ~ 1``) that makes every atom have exactly the grid norm of ``psi``.

The spatial step of level ``j`` is chosen so that the support of ``g_j``
fits in one period of the sublattice. The frame operator is then the
Fourier multiplier ``M(w) = (2 pi)^n mu0 sum_j |g_j(w)|^2 / abs_det(h_j)``,
and analysis / synthesis per level reduce to a fold plus a small FFT.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import cones
from .besov import cell_integral, index_gate
from .spectral import GridFunction, GridMismatchError, bump, worker_count
from .tube import GateError, TubeFunction, closure_mask, extend_full, restrict

__all__ = [
    "AtomLevel",
    "AtomSystem",
    "CoeffSequence",
    "AtomError",
    "FrameConvergenceWarning",
    "make_mother",
    "build_atom_system",
    "atom_eval",
    "coefficients",
    "analyze",
    "synthesize",
    "frame_bounds",
    "overlap_audit",
    "bergman_atom_eval",
    "bergman_analyze",
    "bergman_synthesize",
    "write_coefficients_csv",
]

POWER_STEPS = 20


class AtomError(ValueError):
    pass


class FrameConvergenceWarning(RuntimeWarning):
    pass


def make_mother(cone, grid, radius=1.0):
    """``psi^(w) = bump(distance(w, e) / radius)``, supported in ``B_radius(e)``."""
    w = grid.frequencies().reshape(-1, cone.n)
    spec = np.zeros(len(w))
    inside = cones.contains(cone, w)
    spec[inside] = bump(cones.distance(cone, cone.e, w[inside]) / radius)
    return GridFunction(grid, spectrum=spec.reshape(grid.shape))


@dataclass(eq=False)
class AtomLevel:
    """All atoms sharing the group element ``h = factorize(y)``."""

    j: int
    y: np.ndarray
    h: cones.GroupElement
    renorm: float
    index: np.ndarray = field(repr=False)  # flat frequency indices of the support
    values: np.ndarray = field(repr=False)  # g_j on the support
    fold: np.ndarray = field(repr=False)  # flat index of the frequency modulo the period
    m: np.ndarray = field(repr=False)  # spatial step in grid cells, per axis
    period: np.ndarray = field(repr=False)  # N / m per axis
    offset: int = 0
    weight: float = 0.0
    step: np.ndarray = field(default=None, repr=False)

    @property
    def count(self):
        return int(np.prod(self.period))

    @property
    def cell_volume(self):
        return float(np.prod(self.step))

    def positions(self):
        """Spatial points in coefficient order, shape ``(count, n)``."""
        axes = [(np.arange(p) - p // 2) * s for p, s in zip(self.period, self.step)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


@dataclass(eq=False)
class AtomSystem:
    cone: cones.ConeDescriptor
    grid: object
    lattice: object
    mother: GridFunction
    mother_radius: float
    spatial_step: float
    levels: list
    cell_radius: float
    mu0: float
    overlap_bound: int
    _bounds: tuple = field(default=None, repr=False)
    _mask: np.ndarray = field(default=None, repr=False)

    @property
    def size(self):
        return sum(lv.count for lv in self.levels)

    @property
    def weights(self):
        return np.concatenate([np.full(lv.count, lv.weight) for lv in self.levels])

    def locate(self, i):
        """``(level, local index)`` of atom ``i``."""
        if not 0 <= i < self.size:
            raise IndexError(f"atom index {i} out of range")
        for lv in self.levels:
            if i < lv.offset + lv.count:
                return lv, i - lv.offset
        raise IndexError(i)

    def frequency_centers(self):
        return np.array([lv.h.act_inverse_transpose(self.cone.e) for lv in self.levels])

    def frame_mask(self):
        """Grid points of the cone within ``cell_radius`` of a level center."""
        if self._mask is None:
            w = self.grid.frequencies().reshape(-1, self.cone.n)
            inside = np.flatnonzero(cones.contains(self.cone, w))
            near = np.full(len(inside), np.inf)
            for c in self.frequency_centers():
                near = np.minimum(near, cones.distance(self.cone, c, w[inside]))
            mask = np.zeros(len(w), dtype=bool)
            mask[inside[near <= self.cell_radius]] = True
            self._mask = mask.reshape(self.grid.shape)
        return self._mask


@dataclass(eq=False)
class CoeffSequence:
    values: np.ndarray
    residual: float = 0.0
    iterations: int = 0
    converged: bool = True
    A: float = float("nan")
    B: float = float("nan")

    def __len__(self):
        return len(self.values)

    def __mul__(self, s):
        return CoeffSequence(self.values * s, self.residual, self.iterations, self.converged,
                             self.A, self.B)

    __rmul__ = __mul__


def _pow2_floor(x):
    return 1 << max(int(math.floor(math.log2(x))), 0) if x >= 1 else 1


def build_atom_system(cone, lattice, spatial_step, mother, mother_radius=1.0,
                      overlap_probes=4000, seed=0):
    """Atoms over ``lattice`` with spatial sublattices of relative step ``spatial_step``.

    ``spatial_step <= 1`` keeps every level alias-free (the frame operator
    is then an exact Fourier multiplier); larger values undersample.

    Raises
    ------
    AtomError
        If the mother spectrum is not inside the cone, a level spectrum
        touches the edge of the frequency box, or the overlap audit
        exceeds four times the nominal bound ``3^(n+1)``.
    """
    grid = mother.grid
    if grid.n != cone.n:
        raise GridMismatchError("grid dimension does not match the cone")
    if spatial_step <= 0:
        raise AtomError("spatial_step must be positive")
    flat = mother.spectrum.reshape(-1)
    nz = np.flatnonzero(np.abs(flat) > 0)
    if len(nz) == 0 or not np.all(cones.contains(cone, grid.flat_frequencies(nz))):
        raise AtomError("mother spectrum must be nonzero and supported inside the cone")
    mother_energy = float(np.sum(np.abs(flat) ** 2))
    w_all = grid.frequencies().reshape(-1, cone.n)
    in_cone = np.flatnonzero(cones.contains(cone, w_all))
    w_in = w_all[in_cone]
    mu0 = cell_integral(cone, lattice.delta, -cone.n_over_R)
    levels = []
    offset = 0
    for j, y in enumerate(lattice.points):
        h = cones.factorize(cone, y)
        v = h.act_transpose(w_in)
        ok = cones.contains(cone, v)
        d = np.full(len(v), np.inf)
        d[ok] = cones.distance(cone, cone.e, v[ok])
        hit = np.flatnonzero(d < mother_radius)
        vals = bump(d[hit] / mother_radius)
        keep = vals > 0
        idx, vals = in_cone[hit[keep]], vals[keep]
        if len(idx) == 0:
            raise AtomError(f"level {j} has no support on the grid")
        multi = np.unravel_index(idx, grid.shape)
        for a in range(cone.n):
            if multi[a].min() == 0 or multi[a].max() == grid.N - 1:
                raise AtomError(f"level {j} spectrum leaves the frequency box")
        # s_j such that s_j abs_det^(1/2) psi^(h^T w) has the mother's grid norm
        renorm = math.sqrt(mother_energy / float(np.sum(vals**2)) / h.abs_det)
        values = vals * renorm * math.sqrt(h.abs_det)
        width = np.array([multi[a].max() - multi[a].min() + 1 for a in range(cone.n)])
        m = np.array([_pow2_floor(spatial_step * grid.N / wa) for wa in width])
        m = np.minimum(m, grid.N)
        period = grid.N // m
        k = [multi[a] - grid.N // 2 for a in range(cone.n)]
        fold = np.ravel_multi_index(tuple(np.mod(k[a], period[a]) for a in range(cone.n)),
                                    tuple(period))
        step = m * grid.dx
        level = AtomLevel(j, np.asarray(y, dtype=float), h, renorm, idx, values, fold, m,
                          period, offset, 0.0, step)
        level.weight = mu0 * float(np.prod(step)) / h.abs_det
        offset += level.count
        levels.append(level)
    system = AtomSystem(cone, grid, lattice, mother, mother_radius, spatial_step, levels,
                        lattice.covering_radius, mu0, 3 ** (cone.n + 1))
    if overlap_probes:
        worst = overlap_audit(system, overlap_probes, seed)
        if worst > 4 * system.overlap_bound:
            raise AtomError(f"cell overlap {worst} exceeds 4 x {system.overlap_bound}")
    return system


def overlap_audit(system, probes=4000, seed=0):
    """Largest number of cells containing a Monte Carlo probe point.

    Spatial boxes of one level tile the period box, so the count equals
    the number of cone balls ``B_cell_radius(y_j)`` containing the cone
    coordinate of the probe.
    """
    cone = system.cone
    rng = np.random.default_rng(seed)
    centers = np.array([lv.y for lv in system.levels])
    anchors = centers[rng.integers(len(centers), size=probes)]
    pts = cones.random_points(cone, rng, probes, system.cell_radius)
    # move probes from e into the neighbourhood of random lattice points
    moved = np.array([cones.factorize(cone, a).act(p) for a, p in zip(anchors, pts)])
    dist = cones.distance(cone, moved[:, None, :], centers[None, :, :])
    return int((dist < system.cell_radius).sum(axis=1).max())


# -- per-level transforms ----------------------------------------------------


def _phase(grid, level):
    """``exp(i <x_t, center>)`` over the level's positions (natural FFT order)."""
    out = np.ones(tuple(level.period), dtype=complex)
    for a in range(grid.n):
        t = np.fft.fftfreq(level.period[a], 1.0 / level.period[a])
        shape = [1] * grid.n
        shape[a] = level.period[a]
        out = out * np.exp(1j * grid.center[a] * t * level.step[a]).reshape(shape)
    return out


def _level_inner(spec_flat, grid, level):
    """``<f, atom_t>`` for all positions ``t`` of one level, centered order."""
    prod = spec_flat[level.index] * level.values
    size = level.count
    B = np.bincount(level.fold, prod.real, size) + 1j * np.bincount(level.fold, prod.imag, size)
    B = B.reshape(tuple(level.period))
    vals = sfft.ifftn(B, workers=worker_count()) * (np.prod(level.period) * grid.cell_w)
    vals = vals * _phase(grid, level)
    return sfft.fftshift(vals).reshape(-1)


def _level_synth(coeffs, grid, level, out_flat):
    """Add ``sum_t c_t atom_t`` of one level to a flat spectrum."""
    c = sfft.ifftshift(coeffs.reshape(tuple(level.period)))
    c = c * np.conj(_phase(grid, level))
    T = sfft.fftn(c, workers=worker_count()).reshape(-1)
    # support indices are distinct within a level
    out_flat[level.index] += level.values * T[level.fold]


def coefficients(f, system):
    """Raw inner products ``<f, atom_i>`` in index order."""
    if f.grid != system.grid:
        raise GridMismatchError("function and atom system use different grids")
    flat = f.spectrum.reshape(-1)
    return np.concatenate([_level_inner(flat, system.grid, lv) for lv in system.levels])


def synthesize(coeffs, system, grid=None):
    """``sum_i c_i atom_i``, accumulated level by level in the spectral domain."""
    grid = grid or system.grid
    if grid != system.grid:
        raise GridMismatchError("atom system was built on a different grid")
    vals = np.asarray(getattr(coeffs, "values", coeffs), dtype=complex)
    if vals.shape != (system.size,):
        raise IndexError(f"expected {system.size} coefficients, got {vals.shape}")
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite coefficients")
    out = np.zeros(grid.N**grid.n, dtype=complex)
    for lv in system.levels:
        _level_synth(vals[lv.offset : lv.offset + lv.count], grid, lv, out)
    return GridFunction(grid, spectrum=out.reshape(grid.shape))


def atom_eval(system, i, grid=None):
    """Atom ``i`` as a grid function."""
    lv, t = system.locate(i)
    grid = grid or system.grid
    c = np.zeros(lv.count, dtype=complex)
    c[t] = 1.0
    out = np.zeros(grid.N**grid.n, dtype=complex)
    _level_synth(c, grid, lv, out)
    return GridFunction(grid, spectrum=out.reshape(grid.shape))


def _apply_frame(spec, system):
    f = GridFunction(system.grid, spectrum=spec)
    return synthesize(system.weights * coefficients(f, system), system).spectrum


def frame_bounds(system, steps=POWER_STEPS, seed=0):
    """Power-iteration estimates ``(A, B)`` of the frame operator on the frame mask."""
    if system._bounds is not None:
        return system._bounds
    mask = system.frame_mask()
    rng = np.random.default_rng(seed)
    v = np.where(mask, rng.standard_normal(mask.shape) + 1j * rng.standard_normal(mask.shape), 0)
    B = 0.0
    for _ in range(steps):
        v = v / np.linalg.norm(v)
        Sv = _apply_frame(v, system)
        B = float(np.real(np.vdot(v, Sv)))
        v = Sv
    top = 1.01 * B
    u = np.where(mask, rng.standard_normal(mask.shape) + 1j * rng.standard_normal(mask.shape), 0)
    shifted = 0.0
    for _ in range(steps):
        u = u / np.linalg.norm(u)
        Tu = np.where(mask, top * u - _apply_frame(u, system), 0)
        shifted = float(np.real(np.vdot(u, Tu)))
        u = Tu
    A = max(top - shifted, 0.0)
    system._bounds = (A, B)
    return A, B


def analyze(f, system, tol=1e-3, max_iter=200, params=None):
    """Dual-frame coefficients ``c_i = w_i <S^{-1} f, atom_i>``.

    ``S^{-1} f`` is approached by Richardson iteration ``g += omega (f - S g)``
    with ``omega = 2 / (A + B)``, stopping once the relative residual
    ``||f - synthesize(c)|| / ||f||`` is at most ``tol``. Non-convergence
    emits :class:`FrameConvergenceWarning` and returns the last iterate
    with ``converged=False``.
    """
    if params is not None and not index_gate(system.cone, params).atomic_ok:
        raise GateError(f"atomic gate fails for {params}")
    if f.grid != system.grid:
        raise GridMismatchError("function and atom system use different grids")
    w = system.weights
    fs = f.spectrum
    ref = float(np.linalg.norm(fs))
    if ref == 0:
        return CoeffSequence(np.zeros(system.size, dtype=complex))
    A, B = frame_bounds(system)
    if not (0 < A <= B):
        raise AtomError(f"degenerate frame bounds A={A}, B={B}")
    omega = 2.0 / (A + B)
    g = np.zeros_like(fs)
    r = fs
    res = 1.0
    it = 0
    c = np.zeros(system.size, dtype=complex)
    while it < max_iter:
        g = g + omega * r
        c = w * coefficients(GridFunction(system.grid, spectrum=g), system)
        r = fs - synthesize(c, system).spectrum
        it += 1
        res = float(np.linalg.norm(r)) / ref
        if res <= tol:
            break
    converged = res <= tol
    if not converged:
        warnings.warn(
            f"frame iteration stopped at residual {res:.3g} after {it} iterations",
            FrameConvergenceWarning,
            stacklevel=2,
        )
    return CoeffSequence(c, res, it, converged, A, B)


# -- tube side ---------------------------------------------------------------


def bergman_atom_eval(system, i, tube_grid):
    """Extension of atom ``i`` to the tube (boundary limit equals ``atom_eval``)."""
    return extend_full(atom_eval(system, i), tube_grid)


def bergman_analyze(F, system, tol=1e-3, max_iter=200, params=None, amplification_cap=1e6):
    """Coefficients of ``restrict(F)`` at the lowest stored height."""
    f = restrict(F, F.tube_grid.lowest, amplification_cap=amplification_cap)
    return analyze(f, system, tol, max_iter, params)


def bergman_synthesize(coeffs, system, tube_grid):
    """``sum_i d_i Psi_i`` as a lazily evaluated tube function."""
    f = synthesize(coeffs, system)
    spec = f.spectrum.reshape(-1)
    keep = closure_mask(system.cone, tube_grid.grid.frequencies().reshape(-1, system.cone.n))
    spec = np.where(keep, spec, 0).reshape(f.grid.shape)
    return TubeFunction(tube_grid, boundary_spectrum=spec, source=f)


def write_coefficients_csv(coeffs, system, path, header_line=None, floor=0.0):
    """Rows ``i, y0.., x0.., re, im``; returns the number of rows written.

    Coefficients with ``|d| < floor * max|d|`` are omitted.
    """
    vals = np.asarray(getattr(coeffs, "values", coeffs))
    cut = floor * float(np.max(np.abs(vals))) if len(vals) else 0.0
    written = 0
    n = system.cone.n
    with open(path, "w", newline="") as fh:
        if header_line:
            fh.write(header_line + "\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["i"] + [f"y{a}" for a in range(n)] + [f"x{a}" for a in range(n)]
                    + ["re", "im"])
        for lv in system.levels:
            ys = [repr(float(v)) for v in lv.y]
            for t, x in enumerate(lv.positions()):
                d = vals[lv.offset + t]
                if abs(d) < cut or (cut == 0 and floor > 0 and d == 0):
                    continue
                wr.writerow([lv.offset + t] + ys + [repr(float(v)) for v in x]
                            + [repr(float(d.real)), repr(float(d.imag))])
                written += 1
    return written
