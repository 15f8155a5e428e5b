"""End-to-end assembly: lattice, partition, atoms and tube grid from one config,
plus seeded band-limited test data and the round-trip experiment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import atoms, cones, lattice, spectral, tube
from .besov import ParamSet, sequence_norm

__all__ = [
    "Setup",
    "auto_grid",
    "build_setup",
    "sample_function",
    "sample_sequence",
    "roundtrip",
    "synthesis_ratios",
    "bracket",
]


@dataclass(eq=False)
class Setup:
    cone: cones.ConeDescriptor
    grid: spectral.FrequencyGrid
    lattice: lattice.ConeLattice
    partition: spectral.Partition
    system: atoms.AtomSystem
    tube_grid: tube.TubeGrid
    params: ParamSet


def auto_grid(cone, radius, N, pad=0.08):
    """Frequency grid around the bounding box of ``B_radius(e)``, padded by ``pad``."""
    lo, hi = cones.ball_bounding_box(cone, radius)
    ext = hi - lo
    return spectral.FrequencyGrid.from_box(lo - pad * ext, hi + pad * ext, N)


def build_setup(cone, grid, region, params, delta=0.25, lam=2.0, spatial_step=1.0,
                mother_radius=1.0, tube_cfg=None, seed=42):
    lat = lattice.build_lattice(cone, delta, lam, region, seed=seed)
    part = spectral.build_partition(cone, lat, grid)
    mother = atoms.make_mother(cone, grid, mother_radius)
    system = atoms.build_atom_system(cone, lat, spatial_step, mother, mother_radius, seed=seed)
    tube_cfg = dict(tube_cfg or {})
    tg = tube.log_radial_heights(cone, grid, **tube_cfg)
    return Setup(cone, grid, lat, part, system, tg, params)


def _default_half_width(grid):
    return 0.125 * float(np.min(grid.N * grid.dx))


def sample_function(cone, grid, rng, radius=(0.3, 0.6), drift=0.15, shift=None):
    """Seeded band-limited function with spectrum in a ball near ``e``.

    The spectrum is a bump of random radius around ``exp(Q u)`` with
    ``|u| <= drift``, times a random complex amplitude and a modulation
    that translates the function by up to ``shift`` per axis (default: an
    eighth of the spatial box).
    """
    shift = _default_half_width(grid) if shift is None else shift
    Q = cones.tangent_basis(cone)
    u = rng.standard_normal(cone.n)
    u *= drift * rng.random() / max(np.linalg.norm(u), 1e-300)
    center = cones.exp_map(cone, Q @ u)
    rho = rng.uniform(*radius)
    x0 = rng.uniform(-shift, shift, cone.n)
    amp = rng.standard_normal() + 1j * rng.standard_normal()
    w = grid.frequencies().reshape(-1, cone.n)
    spec = np.zeros(len(w), dtype=complex)
    inside = cones.contains(cone, w)
    d = cones.distance(cone, center, w[inside])
    spec[inside] = amp * spectral.bump(d / rho) * np.exp(-1j * (w[inside] @ x0))
    return spectral.GridFunction(grid, spectrum=spec.reshape(grid.shape))


def sample_sequence(system, rng, half_width=None):
    """Random coefficients on atoms at positions with ``|x|_inf <= half_width``.

    Refining ``N`` at a fixed frequency box keeps the level steps, so a
    fixed ``half_width`` reproduces the same coefficients on the same atoms.
    """
    vals = np.zeros(system.size, dtype=complex)
    half = _default_half_width(system.grid) if half_width is None else half_width
    for lv in system.levels:
        pos = lv.positions()
        sel = np.flatnonzero(np.all(np.abs(pos) <= half, axis=1))
        sub = np.random.default_rng([int(rng.integers(2**31)), lv.j])
        vals[lv.offset + sel] = sub.standard_normal(len(sel)) + 1j * sub.standard_normal(len(sel))
    return vals


def roundtrip(setup, f, tol=1e-4, max_iter=200):
    """Tube round trip of ``f``; returns a dict of diagnostics."""
    F = tube.extend_full(f, setup.tube_grid, setup.partition, setup.params)
    d = atoms.bergman_analyze(F, setup.system, tol, max_iter, setup.params)
    G = atoms.bergman_synthesize(d, setup.system, setup.tube_grid)
    norm_F = tube.bergman_norm(F, setup.params)
    seq = sequence_norm(d, setup.system, setup.params)
    return {
        "residual": d.residual,
        "iterations": d.iterations,
        "converged": d.converged,
        "tube_error": tube.bergman_norm(F - G, setup.params) / norm_F,
        "bergman_norm": norm_F,
        "sequence_norm": seq,
        "coefficient_ratio": seq / norm_F,
        "A": d.A,
        "B": d.B,
        "coeffs": d,
    }


def synthesis_ratios(setup, count, seed, half_width=None):
    """``bergman_norm(synthesis) / sequence_norm`` over seeded random sequences."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        lam = sample_sequence(setup.system, rng, half_width)
        lam = lam / sequence_norm(lam, setup.system, setup.params)
        G = atoms.bergman_synthesize(lam, setup.system, setup.tube_grid)
        out.append(tube.bergman_norm(G, setup.params))
    return out


def bracket(ratios):
    """Smallest ``C`` with every ratio in ``[1/C, C]``."""
    r = np.asarray(ratios, dtype=float)
    return float(max(r.max(), 1.0 / r.min()))

