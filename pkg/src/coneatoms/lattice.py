"""(delta, lambda)-lattices in a truncated region of a symmetric cone."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from . import cones

__all__ = [
    "Region",
    "ConeLattice",
    "CoverageReport",
    "PackingViolationWarning",
    "LatticeError",
    "build_lattice",
    "geometric_lattice",
    "verify_packing",
    "verify_covering",
    "nearest_distance",
    "write_lattice_csv",
    "read_lattice_csv",
]

MIN_REJECTIONS = 2000
MAX_CANDIDATES = 1 << 19
BATCH = 1024


class LatticeError(ValueError):
    pass


class PackingViolationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Region:
    """Truncation ``det_min <= det(y) <= det_max``, ``distance(e, y) <= radius_max``."""

    det_min: float
    det_max: float
    radius_max: float

    def __post_init__(self):
        if not (0 < self.det_min < self.det_max):
            raise LatticeError("need 0 < det_min < det_max")
        if not self.radius_max > 0:
            raise LatticeError("need radius_max > 0")

    @classmethod
    def ball(cls, radius, log_det_span=None):
        """Invariant ball around ``e``, optionally cut in ``log det``."""
        span = radius * 10 if log_det_span is None else log_det_span
        return cls(math.exp(-span), math.exp(span), radius)

    def contains(self, cone, y, margin=0.0):
        """Membership, optionally shrunk by an invariant-distance ``margin``.

        The distance from ``y`` to a level set ``det = c`` is
        ``|log det(y) - log c| / sqrt(R)``, which gives the ``det`` margin.
        """
        y = np.asarray(y, dtype=float)
        inside = cones.contains(cone, y)
        out = np.zeros(y.shape[:-1], dtype=bool)
        if not np.any(inside):
            return out
        yi = y[inside]
        logdet = np.log(cones.det(cone, yi))
        slack = margin * math.sqrt(cone.R)
        ok = (logdet >= math.log(self.det_min) + slack) & (
            logdet <= math.log(self.det_max) - slack
        )
        ok &= cones.distance(cone, cone.e, yi) <= self.radius_max - margin
        out[inside] = ok
        return out


@dataclass(frozen=True, eq=False)
class ConeLattice:
    cone: cones.ConeDescriptor
    points: np.ndarray
    delta: float
    lam: float
    region: Region
    verified_packing: float
    verified_covering: float = float("nan")

    def __len__(self):
        return len(self.points)

    @property
    def dets(self):
        return cones.det(self.cone, self.points)

    @property
    def covering_radius(self):
        return self.lam * self.delta

    @classmethod
    def from_points(cls, cone, points, delta, lam, region):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lat = cls(cone, points, delta, lam, region, float("inf"))
        packing = verify_packing(lat)
        return cls(cone, points, delta, lam, region, packing)


def _pairwise(cone, a, b):
    return cones.distance(cone, a[:, None, :], b[None, :, :])


def nearest_distance(cone, points, probes, chunk=4096):
    """Distance from each probe to its nearest lattice point."""
    probes = np.atleast_2d(probes)
    out = np.full(len(probes), np.inf)
    if len(points) == 0:
        return out
    for start in range(0, len(probes), chunk):
        block = probes[start : start + chunk]
        out[start : start + chunk] = _pairwise(cone, block, points).min(axis=1)
    return out


def _candidate_box(cone, region):
    rho = region.radius_max
    sr = math.sqrt(cone.R)
    lo = np.full(cone.n, -rho)
    hi = np.full(cone.n, rho)
    lo[0] = max(-rho, math.log(region.det_min) / sr)
    hi[0] = min(rho, math.log(region.det_max) / sr)
    if lo[0] > hi[0]:
        raise LatticeError("region is empty")
    return lo, hi


def _candidates(cone, region, seed):
    """Quasi-random points of the region, uniform in tangent coordinates.

    The first tangent coordinate is ``log det / sqrt(R)``, so the stream is
    stratified log-uniformly in the determinant.
    """
    lo, hi = _candidate_box(cone, region)
    Q = cones.tangent_basis(cone)
    sampler = qmc.Sobol(cone.n, scramble=True, seed=seed)
    drawn = 0
    while drawn < MAX_CANDIDATES:
        u = qmc.scale(sampler.random(BATCH), lo, hi) if np.all(hi > lo) else np.tile(
            lo, (BATCH, 1)
        )
        drawn += BATCH
        u = u[np.linalg.norm(u, axis=1) <= region.radius_max]
        yield cones.exp_map(cone, u @ Q.T)


def build_lattice(cone, delta=0.5, lam=2.0, region=None, seed=42, include_identity=True,
                  covering_probes=2000):
    """Greedy maximal ``2 delta``-separated set in ``region``.

    Quasi-random candidates are accepted when they are at distance at least
    ``2 delta`` from every accepted point. The search stops once
    ``max(10 * len(points), MIN_REJECTIONS)`` consecutive candidates have
    been rejected, or the candidate budget is spent.

    Parameters
    ----------
    cone : ConeDescriptor
    delta : float
        Half the minimal separation.
    lam : float
        Covering factor, at least 2.
    region : Region
    seed : int
    include_identity : bool
        Try ``e`` as the first candidate.
    covering_probes : int
        Probes used to fill ``verified_covering`` (0 skips it).
    """
    if delta <= 0:
        raise LatticeError("delta must be positive")
    if lam < 2:
        raise LatticeError("lambda must be at least 2")
    if region is None:
        region = Region.ball(3.0)
    sep = 2.0 * delta
    accepted = []
    if include_identity and region.contains(cone, cone.e[None, :])[0]:
        accepted.append(cone.e.copy())
    rejected_run = 0
    for batch in _candidates(cone, region, seed):
        batch = batch[region.contains(cone, batch)]
        if len(batch) == 0:
            continue
        if accepted:
            near = nearest_distance(cone, np.array(accepted), batch)
        else:
            near = np.full(len(batch), np.inf)
        fresh = []
        for k in range(len(batch)):
            ok = near[k] >= sep
            if ok and fresh:
                ok = cones.distance(cone, np.array(fresh), batch[k]).min() >= sep
            if ok:
                fresh.append(batch[k])
                rejected_run = 0
            else:
                rejected_run += 1
                if rejected_run >= max(10 * (len(accepted) + len(fresh)), MIN_REJECTIONS):
                    break
        accepted.extend(fresh)
        if rejected_run >= max(10 * len(accepted), MIN_REJECTIONS):
            break
    if not accepted:
        raise LatticeError("failed to place any lattice point")
    points = np.array(accepted)
    lat = ConeLattice.from_points(cone, points, delta, lam, region)
    if lat.verified_packing < sep:
        raise AssertionError("greedy packing violated its own separation")
    if covering_probes:
        report = verify_covering(lat, covering_probes, seed)
        lat = ConeLattice(cone, points, delta, lam, region, lat.verified_packing,
                          report.max_nearest)
    return lat


def geometric_lattice(delta=0.5, lam=2.0, j_range=range(-3, 4)):
    """The exact half-line lattice ``{e^(2 delta j)}``."""
    cone = cones.make_cone("halfline")
    js = np.array(list(j_range), dtype=float)
    pts = np.exp(2 * delta * js)[:, None]
    region = Region(float(pts.min()), float(pts.max()), float(np.abs(np.log(pts)).max()))
    return ConeLattice.from_points(cone, pts, delta, lam, region)


def verify_packing(lattice):
    """Minimum pairwise distance (``inf`` for fewer than two points).

    Emits :class:`PackingViolationWarning` when it is below ``2 delta``.
    """
    pts = lattice.points
    if len(pts) < 2:
        return float("inf")
    best = float("inf")
    for start in range(0, len(pts), 512):
        d = _pairwise(lattice.cone, pts[start : start + 512], pts)
        rows = np.arange(d.shape[0])
        d[rows, rows + start] = np.inf
        best = min(best, float(d.min()))
    if best < 2 * lattice.delta:
        warnings.warn(
            f"packing violated: min distance {best:.6g} < 2*delta = {2 * lattice.delta:.6g}",
            PackingViolationWarning,
            stacklevel=2,
        )
    return best


@dataclass(frozen=True)
class CoverageReport:
    fraction: float
    max_nearest: float
    n_probes: int
    radius: float


def _interior_probes(cone, region, margin, count, rng):
    lo, hi = _candidate_box(cone, region)
    Q = cones.tangent_basis(cone)
    sr = math.sqrt(cone.R)
    lo = lo.copy()
    hi = hi.copy()
    lo[0] = max(lo[0], math.log(region.det_min) / sr + margin)
    hi[0] = min(hi[0], math.log(region.det_max) / sr - margin)
    rmax = region.radius_max - margin
    if rmax <= 0 or lo[0] > hi[0]:
        return np.empty((0, cone.n))
    lo = np.maximum(lo, -rmax)
    hi = np.minimum(hi, rmax)
    out = []
    have = 0
    for _ in range(1000):
        u = lo + (hi - lo) * rng.random((max(4 * count, 256), cone.n))
        u = u[np.linalg.norm(u, axis=1) <= rmax]
        out.append(u)
        have += len(u)
        if have >= count:
            break
    u = np.concatenate(out)[:count]
    return cones.exp_map(cone, u @ Q.T)


def verify_covering(lattice, probes=10_000, seed=0):
    """Monte Carlo check that ``lambda delta`` balls cover the region interior.

    Probes are drawn uniformly in tangent coordinates from the region
    shrunk by ``lambda delta``.
    """
    if probes < 1:
        raise ValueError("need at least one probe")
    radius = lattice.covering_radius
    if len(lattice) == 0:
        return CoverageReport(0.0, float("inf"), 0, radius)
    rng = np.random.default_rng(seed)
    pts = _interior_probes(lattice.cone, lattice.region, radius, probes, rng)
    if len(pts) == 0:
        return CoverageReport(1.0, 0.0, 0, radius)
    near = nearest_distance(lattice.cone, lattice.points, pts)
    return CoverageReport(
        float(np.mean(near <= radius)), float(near.max()), len(pts), radius
    )


def write_lattice_csv(lattice, path, header_line=None):
    """One point per row: ``j, x0, x1, ..., det``."""
    with open(path, "w", newline="") as fh:
        if header_line:
            fh.write(header_line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["j"] + [f"x{k}" for k in range(lattice.cone.n)] + ["det"])
        for j, (p, d) in enumerate(zip(lattice.points, lattice.dets)):
            writer.writerow([j] + [repr(float(v)) for v in p] + [repr(float(d))])


def read_lattice_csv(path, cone):
    rows = []
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    next(reader)
    for row in reader:
        rows.append([float(v) for v in row[1 : 1 + cone.n]])
    return np.array(rows)
