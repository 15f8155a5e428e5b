"""Besov norms, the atomic sequence-space norm and the index gates."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import cones
from .spectral import GridMismatchError, window_convolve

__all__ = [
    "ParamSet",
    "IndexReport",
    "qtilde_index",
    "q_index",
    "index_gate",
    "besov_norm",
    "sequence_norm",
    "cell_integral",
    "sequence_exponent",
]

INF = math.inf


@dataclass(frozen=True)
class ParamSet:
    """Exponents ``1 <= p, q < inf`` and weight ``nu``."""

    p: float = 2.0
    q: float = 2.0
    nu: float = 1.0

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (1 <= v < INF):
                raise ValueError(f"{name} must lie in [1, inf), got {v}")
        if not math.isfinite(self.nu):
            raise ValueError("nu must be finite")

    @property
    def p_conj(self):
        return INF if self.p == 1 else self.p / (self.p - 1)


def _encode(v):
    return "inf" if v == INF else v


@dataclass(frozen=True)
class IndexReport:
    q_tilde: float
    q_index: float
    embedding_ok: bool
    isomorphism_ok: bool
    atomic_ok: bool
    rank2_extended_flag: bool

    def to_dict(self):
        d = asdict(self)
        d["q_tilde"] = _encode(self.q_tilde)
        d["q_index"] = _encode(self.q_index)
        return d

    def to_json(self):
        """JSON object; infinite indices are written as the string ``"inf"``."""
        return json.dumps(self.to_dict(), sort_keys=False)


def qtilde_index(cone, params):
    """Embedding index ``(nu + n/R - 1) / (n/(R p') - 1)`` when ``n/R > p'``, else inf."""
    nR = cone.n / cone.R
    pc = params.p_conj
    if not nR > pc:
        return INF
    return (params.nu + nR - 1) / (nR / pc - 1)


def q_index(cone, params):
    """``min(p, p') (nu + n/R - 1) / (n/R - 1)`` for ``n > R``; inf when ``n == R``."""
    if cone.n <= cone.R:
        return INF
    nR = cone.n / cone.R
    return min(params.p, params.p_conj) * (params.nu + nR - 1) / (nR - 1)


def index_gate(cone, params):
    qt = qtilde_index(cone, params)
    qi = q_index(cone, params)
    iso = params.nu > cone.n / cone.R - 1 and params.q < qi
    return IndexReport(
        q_tilde=qt,
        q_index=qi,
        embedding_ok=params.q < qt,
        isomorphism_ok=iso,
        atomic_ok=iso and 1 <= params.p < INF,
        rank2_extended_flag=cone.R == 2,
    )


def besov_norm(f, partition, params, skip_rel=1e-14):
    """``(sum_j det(x_j)^(-nu) ||f * psi_j||_p^q)^(1/q)`` by grid Riemann sums.

    Windows whose piece has norm below ``skip_rel * ||f||_p`` are skipped.
    """
    if f.grid != partition.grid:
        raise GridMismatchError("function and partition live on different grids")
    if not np.all(np.isfinite(f.samples)):
        raise ValueError("non-finite samples")
    ref = f.norm(params.p)
    if ref == 0:
        return 0.0
    cone = partition.cone
    total = 0.0
    for win in partition.windows:
        piece = window_convolve(f, win).norm(params.p)
        if piece < skip_rel * ref:
            continue
        weight = float(cones.det(cone, win.center)) ** (-params.nu)
        total += weight * piece**params.q
    return total ** (1.0 / params.q)


def sequence_exponent(cone, params):
    """Weight exponent ``nu - q n/(2R) - n/R`` of the sequence space."""
    return params.nu - params.q * cone.n / (2 * cone.R) - cone.n / cone.R


def cell_integral(cone, radius, a, samples=1 << 16, seed=0):
    """``int_{B_radius(e)} det(u)^a du`` (closed form on the half-line, QMC otherwise)."""
    if cone.kind == "halfline":
        if abs(a + 1) < 1e-14:
            return 2 * radius
        return (math.exp(radius * (a + 1)) - math.exp(-radius * (a + 1))) / (a + 1)
    pts, box = cones._ball_samples(cone, radius, samples, seed)
    return box * float(np.sum(cones.det(cone, pts) ** a)) / samples


def sequence_norm(coeffs, system, params, samples=1 << 16):
    """The mixed ``b^{p,q}_nu`` norm of coefficients over the cells of ``system``.

    The integrand is read as ``sum_i |lambda_i|^p 1_{U_i}``. A cell is an
    invariant ball of radius ``system.cell_radius`` around the level point
    ``y_j`` times a spatial box of volume ``level.cell_volume``. For
    ``p == q`` the norm is the weighted ``l^p`` sum with weights
    ``int_{U_i} det^a``; otherwise the outer integral is evaluated with
    mapped quasi-random samples of each ball, weighted by the reciprocal
    of their ball multiplicity.
    """
    lam = np.asarray(getattr(coeffs, "values", coeffs))
    if lam.shape != (system.size,):
        raise IndexError(f"expected {system.size} coefficients, got {lam.shape}")
    if not np.all(np.isfinite(lam)):
        raise ValueError("non-finite coefficients")
    cone = system.cone
    p, q = params.p, params.q
    a = sequence_exponent(cone, params)
    r = system.cell_radius
    mass = np.array(
        [
            float(np.sum(np.abs(lam[lv.offset : lv.offset + lv.count]) ** p)) * lv.cell_volume
            for lv in system.levels
        ]
    )
    if not np.any(mass):
        return 0.0
    if p == q:
        base = cell_integral(cone, r, a, samples)
        total = 0.0
        for lv, m in zip(system.levels, mass):
            total += m * lv.h.abs_det * float(cones.det(cone, lv.y)) ** a * base
        return total ** (1.0 / p)
    # p != q: G(x) = sum_j 1_{B_r(y_j)}(x) mass_j, integrate G^{q/p} det^a
    if cone.kind == "halfline":
        return _sequence_norm_halfline(system, mass, r, a, p, q)
    pts, box = cones._ball_samples(cone, r, samples, 0)
    centers = np.array([lv.y for lv in system.levels])
    total = 0.0
    for lv in system.levels:
        x = lv.h.act(pts)
        dist = cones.distance(cone, x[:, None, :], centers[None, :, :])
        inside = dist < r
        G = inside.astype(float) @ mass
        mult = inside.sum(axis=1)
        vals = G ** (q / p) * cones.det(cone, x) ** a / np.maximum(mult, 1)
        total += lv.h.abs_det * box * float(np.sum(vals)) / samples
    return total ** (1.0 / q)


def _sequence_norm_halfline(system, mass, r, a, p, q):
    # G is piecewise constant in log x; integrate exactly between breakpoints
    logs = np.log([lv.y[0] for lv in system.levels])
    edges = np.unique(np.concatenate([logs - r, logs + r]))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        G = float(np.sum(mass[np.abs(logs - mid) < r]))
        if G == 0:
            continue
        if abs(a + 1) < 1e-14:
            seg = hi - lo
        else:
            seg = (math.exp((a + 1) * hi) - math.exp((a + 1) * lo)) / (a + 1)
        total += G ** (q / p) * seg
    return total ** (1.0 / q)
