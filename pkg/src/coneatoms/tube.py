"""Fourier-Laplace extension to the tube ``V + i Omega``, Bergman norms and kernels.

The extension is normalized against the unitary transform of
:mod:`coneatoms.spectral`:

    E f(x + i y) = (2 pi)^(-n/2) int_Omega f^(w) e^{i<x + i y, w>} dw,

so that ``E f(x + i y) -> f(x)`` as ``y -> 0``. The un-normalized Laplace
integral differs by the factor ``TRANSFORM_CONSTANT(n)**-1``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import cones
from .besov import ParamSet, index_gate
from .spectral import GridFunction, GridMismatchError, sharp_projection

__all__ = [
    "TubeGrid",
    "TubeFunction",
    "ExtensionError",
    "GateError",
    "CRValidityWarning",
    "transform_constant",
    "closure_mask",
    "log_radial_heights",
    "extend",
    "extend_full",
    "restrict",
    "bergman_norm",
    "tube_distance",
    "bergman_kernel",
    "calibrate_kernel_constant",
    "reproduce",
    "cr_atom",
    "dump_tube",
]

LEAKAGE_TOL = 1e-10
DEFAULT_CAP = 1e6


class ExtensionError(ValueError):
    pass


class GateError(ValueError):
    pass


class CRValidityWarning(UserWarning):
    pass


def transform_constant(n):
    """Ratio of the normalized extension to the bare Laplace integral."""
    return (2 * math.pi) ** (-n / 2)


def closure_mask(cone, w, rel=1e-12):
    """Points of the closed cone, with a relative tolerance at the boundary."""
    w = np.asarray(w, dtype=float)
    scale = max(float(np.max(np.abs(w))), 1.0) if w.size else 1.0
    return cones.contains(cone, w + rel * scale * cone.e)


# -- height quadrature -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TubeGrid:
    """Spatial grid of ``grid`` times a finite set of heights in the cone.

    ``weights`` approximate Lebesgue ``dy`` on the truncated cone; the
    Bergman weight ``det(y)^(nu - n/R)`` is applied by :meth:`weights_for`.
    """

    cone: cones.ConeDescriptor
    grid: object
    heights: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.heights, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if h.shape[1] != self.cone.n or len(w) != len(h):
            raise ValueError("heights and weights do not match")
        if not np.all(cones.contains(self.cone, h)):
            raise cones.OutsideConeError("all heights must lie in the cone")
        if np.any(w <= 0):
            raise ValueError("height weights must be positive")
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.heights)

    def weights_for(self, params):
        expo = params.nu - self.cone.n_over_R
        return self.weights * cones.det(self.cone, self.heights) ** expo

    @property
    def lowest(self):
        """Index of the height closest to the boundary (smallest trace)."""
        return int(np.argmin(self.heights @ self.cone.e))


def log_radial_heights(cone, grid, log_range=(-14.0, 4.0), step=0.1, angular_radius=0.0,
                       angular_points=1):
    """Product rule in orthonormal tangent coordinates ``y = exp(Q u)``.

    ``u[0] = log det(y) / sqrt(R)`` runs over ``log_range`` with spacing
    ``step`` (trapezoid weights); the remaining coordinates run over a
    tensor grid of ``angular_points`` per axis on ``[-angular_radius,
    angular_radius]``, also with trapezoid weights. The Lebesgue weight
    picks up the exponential Jacobian and ``|det Q| = kappa^(-n/2)``.
    """
    lo, hi = log_range
    k = max(int(round((hi - lo) / step)), 1)
    radial = np.linspace(lo, hi, k + 1)
    rw = np.full(k + 1, (hi - lo) / k)
    rw[[0, -1]] *= 0.5
    axes = [radial]
    waxes = [rw]
    for _ in range(cone.n - 1):
        if angular_points == 1 or angular_radius == 0:
            raise ValueError("cones with n > 1 need angular_points > 1 and angular_radius > 0")
        a = np.linspace(-angular_radius, angular_radius, angular_points)
        aw = np.full(angular_points, 2 * angular_radius / (angular_points - 1))
        aw[[0, -1]] *= 0.5
        axes.append(a)
        waxes.append(aw)
    U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, cone.n)
    W = np.prod(np.stack(np.meshgrid(*waxes, indexing="ij"), axis=-1).reshape(-1, cone.n), axis=1)
    S = U @ cones.tangent_basis(cone).T
    heights = cones.exp_map(cone, S)
    jac = cones.exp_jacobian(cone, S) * cone.jordan_scale ** (-cone.n / 2)
    meta = {"log_range": [lo, hi], "step": step, "angular_radius": angular_radius,
            "angular_points": angular_points}
    return TubeGrid(cone, grid, heights, W * jac, meta)


# -- tube functions ----------------------------------------------------------


class TubeFunction:
    """Values ``F(x + i y_k)`` on a tube grid.

    Built either from a boundary spectrum (``F`` is its extension, evaluated
    lazily per height) or from explicit samples per height.
    """

    def __init__(self, tube_grid, boundary_spectrum=None, samples=None, source=None):
        if (boundary_spectrum is None) == (samples is None):
            raise ValueError("give exactly one of boundary_spectrum or samples")
        self.tube_grid = tube_grid
        self.boundary_spectrum = boundary_spectrum
        self.source = source
        self._samples = {} if samples is None else dict(enumerate(samples))

    @property
    def cone(self):
        return self.tube_grid.cone

    @property
    def grid(self):
        return self.tube_grid.grid

    def __len__(self):
        return len(self.tube_grid)

    def damped_spectrum(self, k):
        y = self.tube_grid.heights[k]
        return _damp(self.cone, self.grid, self.boundary_spectrum, y)

    def at(self, k):
        """``F(. + i y_k)`` as a :class:`GridFunction`."""
        if self.boundary_spectrum is not None:
            return GridFunction(self.grid, spectrum=self.damped_spectrum(k))
        return GridFunction(self.grid, samples=self._samples[k])

    def samples(self, k):
        return self.at(k).samples

    def __sub__(self, other):
        if self.tube_grid is not other.tube_grid:
            raise GridMismatchError("tube functions live on different tube grids")
        if self.boundary_spectrum is not None and other.boundary_spectrum is not None:
            return TubeFunction(self.tube_grid, self.boundary_spectrum - other.boundary_spectrum)
        return TubeFunction(
            self.tube_grid, samples=[self.samples(k) - other.samples(k) for k in range(len(self))]
        )

    def __mul__(self, scalar):
        if self.boundary_spectrum is not None:
            return TubeFunction(self.tube_grid, self.boundary_spectrum * scalar)
        return TubeFunction(self.tube_grid, samples=[self.samples(k) * scalar for k in range(len(self))])

    __rmul__ = __mul__


def _damp(cone, grid, spectrum, y):
    w = grid.frequencies().reshape(-1, cone.n)
    out = np.zeros(w.shape[0], dtype=complex)
    flat = np.asarray(spectrum).reshape(-1)
    nz = np.flatnonzero(flat)
    if len(nz):
        ok = closure_mask(cone, w[nz])
        idx = nz[ok]
        out[idx] = flat[idx] * np.exp(-(w[idx] @ y))
    return out.reshape(grid.shape)


def _check_height(cone, y):
    y = np.asarray(y, dtype=float)
    if y.shape != (cone.n,) or not cones.contains(cone, y):
        raise cones.OutsideConeError("height must be a point of the cone")
    return y


def _check_leakage(cone, f):
    spec = f.spectrum.reshape(-1)
    mag = np.abs(spec) ** 2
    total = float(mag.sum())
    if total == 0:
        return
    nz = np.flatnonzero(mag)
    outside = ~closure_mask(cone, f.grid.flat_frequencies(nz))
    leaked = float(mag[nz[outside]].sum())
    if leaked > LEAKAGE_TOL * total:
        raise ExtensionError(
            f"spectrum leaks outside the closed cone ({leaked / total:.3g} of the mass)"
        )


def extend(f, y, cone):
    """``E f(. + i y)``: damp the spectrum by ``exp(-<y, w>)`` on the closed cone.

    Raises
    ------
    OutsideConeError
        If ``y`` is not in the cone.
    ExtensionError
        If more than ``1e-10`` of the spectral mass lies outside the closed cone.
    """
    y = _check_height(cone, y)
    _check_leakage(cone, f)
    return GridFunction(f.grid, spectrum=_damp(cone, f.grid, f.spectrum, y))


def extend_full(f, tube_grid, partition=None, params=None):
    """``E`` of the sharp projection of ``f`` on every height of ``tube_grid``.

    With ``partition=None`` the sharp projection is the restriction of the
    spectrum to the open cone. When ``params`` is given the embedding gate
    must pass.
    """
    cone = tube_grid.cone
    if f.grid != tube_grid.grid:
        raise GridMismatchError("function and tube grid use different grids")
    if params is not None and not index_gate(cone, params).embedding_ok:
        raise GateError(f"embedding gate fails for {params}")
    if partition is not None:
        g = sharp_projection(f, partition)
    else:
        _check_leakage(cone, f)
        inside = f.grid.omega_mask(cone)
        g = GridFunction(f.grid, spectrum=np.where(inside, f.spectrum, 0))
    return TubeFunction(tube_grid, boundary_spectrum=g.spectrum, source=f)


def restrict(F, y, cone=None, amplification_cap=DEFAULT_CAP, mass_tol=1e-6):
    """Undo the damping at height ``y``.

    ``F`` is a :class:`GridFunction` sampled at height ``y`` (or a
    :class:`TubeFunction`, with ``y`` an index into its heights).
    Frequencies where ``exp(<y, w>)`` exceeds ``amplification_cap`` are
    zeroed; if they would carry more than ``mass_tol`` of the recovered
    spectral mass the inversion is refused.
    """
    if isinstance(F, TubeFunction):
        cone = F.cone
        k = int(y)
        y = F.tube_grid.heights[k]
        F = F.at(k)
    if cone is None:
        raise ValueError("cone is required for a GridFunction input")
    y = _check_height(cone, y)
    grid = F.grid
    flat = F.spectrum.reshape(-1)
    out = np.zeros_like(flat)
    nz = np.flatnonzero(flat)
    if len(nz) == 0:
        return GridFunction(grid, spectrum=out.reshape(grid.shape))
    w = grid.flat_frequencies(nz)
    ok = closure_mask(cone, w)
    idx, w = nz[ok], w[ok]
    expo = w @ y
    big = expo > math.log(amplification_cap)
    recovered = flat[idx] * np.exp(np.minimum(expo, 700.0))
    lost = float(np.sum(np.abs(recovered[big]) ** 2))
    kept = float(np.sum(np.abs(recovered[~big]) ** 2))
    if lost > mass_tol * (lost + kept):
        raise ExtensionError(
            f"amplification cap {amplification_cap:g} exceeded on "
            f"{lost / (lost + kept):.3g} of the spectral mass"
        )
    out[idx[~big]] = recovered[~big]
    return GridFunction(grid, spectrum=out.reshape(grid.shape))


def _height_energy(F, chunk=64):
    """``||F(. + i y_k)||_2^2`` for all heights, from the boundary spectrum."""
    cone, grid = F.cone, F.grid
    flat = F.boundary_spectrum.reshape(-1)
    nz = np.flatnonzero(flat)
    if len(nz) == 0:
        return np.zeros(len(F))
    w = grid.flat_frequencies(nz)
    ok = closure_mask(cone, w)
    w, mag = w[ok], np.abs(flat[nz[ok]]) ** 2
    H = F.tube_grid.heights
    out = np.empty(len(H))
    for s in range(0, len(H), chunk):
        out[s : s + chunk] = np.exp(-2.0 * (H[s : s + chunk] @ w.T)) @ mag
    return out * grid.cell_w


def bergman_norm(F, params):
    """Mixed norm ``(int (int |F|^p dx)^(q/p) det(y)^(nu - n/R) dy)^(1/q)``.

    Inner integrals are grid sums; for ``p == 2`` and a function given by its
    boundary spectrum they are evaluated through the discrete Parseval
    identity. The outer integral uses the tube-grid weights.
    """
    p, q = params.p, params.q
    if p == 2 and F.boundary_spectrum is not None:
        inner = _height_energy(F)
    else:
        inner = np.empty(len(F))
        for k in range(len(F)):
            v = np.abs(F.samples(k))
            if not np.all(np.isfinite(v)):
                raise ValueError("non-finite samples")
            inner[k] = float(np.sum(v**p)) * F.grid.cell_x
    if not np.all(np.isfinite(inner)):
        raise ValueError("non-finite samples")
    total = float(np.sum(F.tube_grid.weights_for(params) * inner ** (q / p)))
    return total ** (1.0 / q)


def tube_distance(F, G, params=None):
    """Relative mixed-norm error ``||F - G|| / ||F||``."""
    params = params or ParamSet(2, 2, F.cone.n_over_R)
    ref = bergman_norm(F, params)
    return bergman_norm(F - G, params) / ref if ref else bergman_norm(G, params)


# -- kernel -----------------------------------------------------------------


def _log_kernel_det(cone, z, w):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if not (np.all(cones.contains(cone, z.imag)) and np.all(cones.contains(cone, w.imag))):
        raise cones.OutsideConeError("imaginary parts must lie in the cone")
    return cones.log_det_complex(cone, (z - np.conj(w)) / 1j)


def bergman_kernel(cone, z, w, c=None):
    """``c * det((z - conj(w))/i)^(-2n/R)`` on the continuous branch.

    ``c`` defaults to the calibrated constant of the cone.
    """
    if c is None:
        c = calibrate_kernel_constant(cone)
    return c * np.exp(-2 * cone.n_over_R * _log_kernel_det(cone, z, w))


def _default_tube_grid(cone):
    from .spectral import FrequencyGrid

    if cone.kind == "halfline":
        grid = FrequencyGrid(1, 8192, math.pi / (32 / 8192), 0.0)
        return log_radial_heights(cone, grid, (-14.0, 4.0), 0.05)
    grid = FrequencyGrid(cone.n, 32, math.pi / 0.5, 0.0)
    return log_radial_heights(cone, grid, (-4.0, 3.0), 0.5, 2.0, 7)


def _tube_points(tube_grid, k):
    x = tube_grid.grid.positions().reshape(-1, tube_grid.cone.n)
    return x + 1j * tube_grid.heights[k]


_CALIBRATED = {}


def _cone_gamma(cone, s, heights, weights):
    """``int_Omega exp(-<e, y>) det(y)^(s - n/R) dy`` by the height rule."""
    return float(np.sum(weights * np.exp(-(heights @ cone.e))
                        * cones.det(cone, heights) ** (s - cone.n_over_R)))


def _laplace_heights(cone):
    if cone.kind == "halfline":
        return log_radial_heights(cone, None, (-30.0, 6.0), 0.02)
    return log_radial_heights(cone, None, (-12.0, 6.0), 0.1, 5.0, 61)


def calibrate_kernel_constant(cone, tube_grid=None, method="laplace"):
    """Fix ``c`` by the reproducing identity at ``z = i e``.

    With ``F0(w) = det((w + i e)/i)^(-2n/R)`` the reproducing property
    requires ``F0(i e) = c * int_T |F0|^2``.

    ``method="direct"`` evaluates the tube integral by quadrature on
    ``tube_grid``. ``method="laplace"`` first integrates over ``V`` exactly
    through Plancherel, which leaves
    ``c = G(2n/R) / (pi^n G(n/R))`` with
    ``G(s) = int_Omega exp(-<e,y>) det(y)^(s-n/R) dy``, and evaluates ``G``
    with the height rule. The half-line value is ``1/pi``.
    """
    key = (str(cone), method)
    if tube_grid is None and key in _CALIBRATED:
        return _CALIBRATED[key]
    if method == "laplace":
        tg = tube_grid or _laplace_heights(cone)
        nR = cone.n_over_R
        c = _cone_gamma(cone, 2 * nR, tg.heights, tg.weights) / (
            math.pi**cone.n * _cone_gamma(cone, nR, tg.heights, tg.weights)
        )
    elif method == "direct":
        tg = tube_grid or _default_tube_grid(cone)
        ie = 1j * cone.e
        total = 0.0
        for k in range(len(tg)):
            z = _tube_points(tg, k)
            F0 = np.exp(-2 * cone.n_over_R * _log_kernel_det(cone, z, ie))
            total += tg.weights[k] * float(np.sum(np.abs(F0) ** 2)) * tg.grid.cell_x
        c = 2.0 ** (-2 * cone.n) / total
    else:
        raise ValueError(f"unknown calibration method {method!r}")
    if tube_grid is None:
        _CALIBRATED[key] = c
    return c


def reproduce(F, z, tube_grid, c):
    """Quadrature of ``int F(w) B(z, w) dV(w)`` over the tube grid.

    ``F`` is a callable on complex coordinate arrays of shape ``(m, n)``.
    """
    cone = tube_grid.cone
    z = np.asarray(z, dtype=complex)
    total = 0j
    for k in range(len(tube_grid)):
        w = _tube_points(tube_grid, k)
        B = bergman_kernel(cone, z[None, :], w, c)
        total += tube_grid.weights[k] * complex(np.sum(F(w) * B)) * tube_grid.grid.cell_x
    return total


def cr_atom(cone, z, xi, r, theta, p, c=None):
    """``(B(z,xi)^2 / B(xi,xi))^((1+r)/p) * (B(z,xi) / B(xi,xi))^(theta/p)``.

    Powers are taken on the continuous branch of ``log det``. A warning is
    issued when ``theta`` violates the validity bound.
    """
    from .crcompare import constants

    k = constants(cone)
    bound = p * (1 - k.eps) + k.eps + k.gamma - 2 - r
    if not theta > bound:
        warnings.warn(
            f"theta={theta} does not exceed the validity bound {bound:.6g}",
            CRValidityWarning,
            stacklevel=2,
        )
    if c is None:
        c = calibrate_kernel_constant(cone)
    logc = math.log(c)
    s = -2 * cone.n_over_R
    log_zx = logc + s * _log_kernel_det(cone, z, xi)
    log_xx = logc + s * _log_kernel_det(cone, xi, xi)
    expo = (2 * log_zx - log_xx) * (1 + r) / p + (log_zx - log_xx) * theta / p
    return np.exp(expo)


def dump_tube(F, directory, header_line=None, heights=None):
    """One CSV per height (``x..., re, im``) plus ``tube_meta.json``."""
    import os

    os.makedirs(directory, exist_ok=True)
    tg = F.tube_grid
    ks = range(len(tg)) if heights is None else heights
    x = tg.grid.positions().reshape(-1, tg.cone.n)
    for k in ks:
        vals = F.samples(k).reshape(-1)
        with open(os.path.join(directory, f"height_{k:04d}.csv"), "w", newline="") as fh:
            if header_line:
                fh.write(header_line + "\n")
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow([f"x{a}" for a in range(tg.cone.n)] + ["re", "im"])
            for xi, v in zip(x, vals):
                wr.writerow([repr(float(t)) for t in xi] + [repr(float(v.real)), repr(float(v.imag))])
    meta = {
        "cone": str(tg.cone),
        "transform_constant": transform_constant(tg.cone.n),
        "grid": tg.grid.to_dict(),
        "heights": tg.heights.tolist(),
        "weights": tg.weights.tolist(),
        "quadrature": tg.meta,
    }
    with open(os.path.join(directory, "tube_meta.json"), "w") as fh:
        if header_line:
            meta["header"] = header_line
        json.dump(meta, fh, indent=2, sort_keys=True)
