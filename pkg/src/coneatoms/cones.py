"""Concrete symmetric cones and their geometry.

Three families are modelled: the half-line ``(0, inf)``, the Lorentz
(forward light) cones in ``R^m`` and the cones of positive-definite
``r x r`` matrices. Points are stored as coordinate vectors of length
``n``; positive-definite matrices use orthonormal coordinates for the
trace inner product (diagonal entries first, then ``sqrt(2) * X[i, j]``
for ``i < j``), so the Euclidean inner product of coordinate vectors is
``tr(XY)`` and each cone is self-dual for it.

All functions broadcast over leading axes: a point argument has shape
``(..., n)``.
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import special

PHI_SAMPLES = 1_000_000
PHI_SEED = 7331

__all__ = [
    "ball_bounding_box",
    "ConeDescriptor",
    "GroupElement",
    "ConeError",
    "OutsideConeError",
    "BranchAmbiguityError",
    "make_cone",
    "parse_cone",
    "contains",
    "det",
    "det_complex",
    "log_det_complex",
    "characteristic",
    "spectral_values",
    "relative_spectrum",
    "factorize",
    "act",
    "distance",
    "exp_map",
    "log_map",
    "exp_jacobian",
    "tangent_basis",
    "random_points",
    "random_group_element",
    "sym_to_vec",
    "vec_to_sym",
]


class ConeError(ValueError):
    """Base error for cone computations."""


class OutsideConeError(ConeError):
    """A point required to lie in the open cone does not."""


class BranchAmbiguityError(ConeError):
    """A complex determinant landed on the branch cut of the power."""


@dataclass(frozen=True, eq=False)
class ConeDescriptor:
    """A concrete symmetric cone.

    Attributes
    ----------
    kind : {"halfline", "lorentz", "spd"}
    size : int
        ``m`` for ``lorentz(m)``, ``r`` for ``spd(r)``, 1 for the half-line.
    n : int
        Dimension of the ambient space.
    R : int
        Rank of the cone.
    e : ndarray, shape (n,)
        Identity point, ``det(e) == 1``.
    phi_e : float
        The characteristic function at ``e``.
    """

    kind: str
    size: int
    n: int
    R: int
    e: np.ndarray = field(repr=False)
    phi_e: float = field(repr=False)

    def __str__(self):
        if self.kind == "halfline":
            return "halfline"
        return f"{self.kind}:{self.size}"

    @property
    def jordan_scale(self):
        """Ratio ``sum(spectral_values(s)**2) / |s|**2`` for tangent vectors."""
        return 2.0 if self.kind == "lorentz" else 1.0

    @property
    def peirce(self):
        """Off-diagonal Peirce multiplicity ``d``, with ``n = R + d R (R-1) / 2``."""
        return {"halfline": 0, "lorentz": self.size - 2, "spd": 1}[self.kind]

    @property
    def n_over_R(self):
        return self.n / self.R


_CONE_RE = re.compile(r"^\s*(halfline|lorentz|spd)\s*(?::\s*(\d+))?\s*$")


def parse_cone(spec):
    """Build a cone from a selection string such as ``"lorentz:3"``.

    Raises
    ------
    ValueError
        If the string is not one of ``halfline``, ``lorentz:m`` (m >= 3) or
        ``spd:r`` (r >= 1).
    """
    if isinstance(spec, ConeDescriptor):
        return spec
    match = _CONE_RE.match(str(spec))
    if match is None:
        raise ValueError(f"malformed cone string {spec!r}")
    kind, size = match.group(1), match.group(2)
    if kind == "halfline":
        if size not in (None, "1"):
            raise ValueError(f"malformed cone string {spec!r}")
        return make_cone("halfline")
    if size is None:
        raise ValueError(f"cone {kind!r} needs a size, e.g. {kind}:3")
    return make_cone(kind, int(size))


@functools.lru_cache(maxsize=None)
def make_cone(kind, size=1):
    if kind == "halfline":
        n, R, e = 1, 1, np.array([1.0])
    elif kind == "lorentz":
        if size < 3:
            raise ValueError("lorentz cones need m >= 3")
        n, R = size, 2
        e = np.zeros(n)
        e[0] = 1.0
    elif kind == "spd":
        if size < 1:
            raise ValueError("spd cones need r >= 1")
        n, R = size * (size + 1) // 2, size
        e = np.zeros(n)
        e[:size] = 1.0
    else:
        raise ValueError(f"unknown cone kind {kind!r}")
    e.setflags(write=False)
    proto = ConeDescriptor(kind, size, n, R, e, float("nan"))
    phi_e = _phi_e(proto)
    return ConeDescriptor(kind, size, n, R, e, phi_e)


# -- matrix coordinates -----------------------------------------------------


@functools.lru_cache(maxsize=None)
def _offdiag(r):
    return np.triu_indices(r, k=1)


def vec_to_sym(v, r):
    """Orthonormal trace coordinates -> symmetric matrices."""
    v = np.asarray(v)
    iu, ju = _offdiag(r)
    out = np.zeros(v.shape[:-1] + (r, r), dtype=v.dtype)
    idx = np.arange(r)
    out[..., idx, idx] = v[..., :r]
    off = v[..., r:] / math.sqrt(2.0)
    out[..., iu, ju] = off
    out[..., ju, iu] = off
    return out


def sym_to_vec(X):
    X = np.asarray(X)
    r = X.shape[-1]
    iu, ju = _offdiag(r)
    idx = np.arange(r)
    return np.concatenate(
        [X[..., idx, idx], math.sqrt(2.0) * X[..., iu, ju]], axis=-1
    )


def _check_dim(cone, x):
    x = np.asarray(x)
    if x.shape[-1:] != (cone.n,):
        raise ValueError(
            f"point has trailing dimension {x.shape[-1:]}, expected ({cone.n},)"
        )
    return x


# -- membership, determinant -------------------------------------------------


def contains(cone, x):
    """True where ``x`` lies in the open cone."""
    x = _check_dim(cone, x).astype(float)
    if cone.kind == "halfline":
        return x[..., 0] > 0
    if cone.kind == "lorentz":
        return x[..., 0] > np.linalg.norm(x[..., 1:], axis=-1)
    X = vec_to_sym(x, cone.size)
    ok = np.ones(x.shape[:-1], dtype=bool)
    for k in range(1, cone.size + 1):
        ok &= np.linalg.det(X[..., :k, :k]) > 0
    return ok


def det(cone, x):
    """Jordan determinant, normalized so that ``det(e) == 1``."""
    x = _check_dim(cone, x)
    if cone.kind == "halfline":
        return x[..., 0]
    if cone.kind == "lorentz":
        return x[..., 0] ** 2 - np.sum(x[..., 1:] ** 2, axis=-1)
    return np.linalg.det(vec_to_sym(x, cone.size))


def det_complex(cone, z):
    """Holomorphic extension of the determinant to complex coordinates.

    Raises
    ------
    BranchAmbiguityError
        If a value lies on the negative real axis (relative tolerance
        1e-12), where powers of the determinant are ambiguous.
    """
    z = _check_dim(cone, np.asarray(z, dtype=complex))
    if cone.kind == "halfline":
        val = z[..., 0]
    elif cone.kind == "lorentz":
        val = z[..., 0] ** 2 - np.sum(z[..., 1:] ** 2, axis=-1)
    else:
        val = np.linalg.det(vec_to_sym(z, cone.size))
    val = np.asarray(val)
    bad = (val.real < 0) & (np.abs(val.imag) <= 1e-12 * np.abs(val))
    if np.any(bad):
        raise BranchAmbiguityError("determinant on the negative real axis")
    return val[()] if val.ndim == 0 else val


def spectral_values(cone, x):
    """Jordan spectral values of real points, shape ``(..., R)``."""
    x = _check_dim(cone, x).astype(float)
    if cone.kind == "halfline":
        return x[..., :1]
    if cone.kind == "lorentz":
        rad = np.linalg.norm(x[..., 1:], axis=-1)
        return np.stack([x[..., 0] + rad, x[..., 0] - rad], axis=-1)
    return np.linalg.eigvalsh(vec_to_sym(x, cone.size))


def relative_spectrum(cone, a, b):
    """Spectral values of ``b`` seen from ``a`` (``a`` in the cone).

    These are the roots ``mu`` of ``det(b - mu a) = 0``, equivalently the
    spectral values of ``g^{-1} b`` for any ``g`` in the automorphism group
    with ``g e = a``. Shape ``(..., R)``.
    """
    a, b = np.broadcast_arrays(
        _check_dim(cone, a).astype(float), _check_dim(cone, b).astype(float)
    )
    if cone.kind == "halfline":
        return b / a
    if cone.kind == "lorentz":
        da = a[..., 0] ** 2 - np.sum(a[..., 1:] ** 2, axis=-1)
        db = b[..., 0] ** 2 - np.sum(b[..., 1:] ** 2, axis=-1)
        mink = a[..., 0] * b[..., 0] - np.sum(a[..., 1:] * b[..., 1:], axis=-1)
        # mink**2 - da*db written without cancellation at a == b
        cross = a[..., :1] * b[..., 1:] - b[..., :1] * a[..., 1:]
        aa = np.sum(a[..., 1:] ** 2, axis=-1)
        bb = np.sum(b[..., 1:] ** 2, axis=-1)
        ab = np.sum(a[..., 1:] * b[..., 1:], axis=-1)
        disc = np.sum(cross**2, axis=-1) - (aa * bb - ab**2)
        root = np.sqrt(np.maximum(disc, 0.0))
        big = np.where(mink >= 0, mink + root, mink - root)
        with np.errstate(divide="ignore", invalid="ignore"):
            mu1 = big / da
            mu2 = np.where(big != 0, db / big, (mink - np.sign(mink) * root) / da)
        return np.stack([np.maximum(mu1, mu2), np.minimum(mu1, mu2)], axis=-1)
    A = vec_to_sym(a, cone.size)
    B = vec_to_sym(b, cone.size)
    L = np.linalg.cholesky(A)
    M = np.linalg.solve(L, B)
    M = np.linalg.solve(L, np.swapaxes(M, -1, -2))
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    return np.linalg.eigvalsh(M)


def log_det_complex(cone, z):
    """Logarithm of ``det_complex`` on the continuous branch.

    Valid where the real part of ``z`` lies in the cone. The branch is the
    one that is real on the cone itself; it is obtained by factoring
    ``det(a + i b) = det(a) * prod(1 + i mu_k)`` with ``mu_k`` the relative
    spectrum of ``b`` with respect to ``a``, each factor lying in the right
    half-plane.
    """
    z = _check_dim(cone, np.asarray(z, dtype=complex))
    a, b = z.real, z.imag
    if not np.all(contains(cone, a)):
        raise OutsideConeError("real part outside the cone; branch undefined")
    mu = relative_spectrum(cone, a, b)
    return np.log(det(cone, a)) + np.sum(np.log1p(1j * mu), axis=-1)


def characteristic(cone, x):
    """Characteristic function ``phi(x) = phi(e) det(x)^(-n/R)``."""
    x = _check_dim(cone, x)
    if not np.all(contains(cone, x)):
        raise OutsideConeError("characteristic function needs points in the cone")
    return cone.phi_e * det(cone, x) ** (-cone.n_over_R)


def _phi_e(cone):
    """Monte Carlo value of the integral of exp(-<e, y>) over the cone."""
    if cone.kind == "halfline":
        return 1.0
    rng = np.random.default_rng(PHI_SEED)
    chunk = 1 << 17
    total, done = 0.0, 0
    while done < PHI_SAMPLES:
        size = min(chunk, PHI_SAMPLES - done)
        if cone.kind == "lorentz":
            # y0 ~ Gamma(m), ybar uniform in the cube of half-width y0:
            # the importance weight is Gamma(m) 2^(m-1) on the cone.
            m = cone.size
            y0 = rng.gamma(m, size=size)
            ybar = (2 * rng.random((size, m - 1)) - 1) * y0[:, None]
            inside = y0 > np.linalg.norm(ybar, axis=1)
            weight = math.gamma(m) * 2.0 ** (m - 1)
        else:
            # diagonal ~ Gamma((r+1)/2), off-diagonal uniform under the
            # 2x2 minor bound; the weight is constant on the cone.
            r = cone.size
            shape = 0.5 * (r + 1)
            d = rng.gamma(shape, size=(size, r))
            iu, ju = _offdiag(r)
            bound = np.sqrt(d[:, iu] * d[:, ju])
            off = (2 * rng.random(bound.shape) - 1) * bound
            y = np.concatenate([d, math.sqrt(2.0) * off], axis=1)
            inside = contains(cone, y)
            k = r * (r - 1) // 2
            weight = math.gamma(shape) ** r * (2.0 * math.sqrt(2.0)) ** k
        total += weight * np.count_nonzero(inside)
        done += size
    return total / PHI_SAMPLES


# -- the simply transitive group --------------------------------------------


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Element of the triangular group acting simply transitively on a cone.

    ``matrix`` is the linear action on coordinate vectors. ``params`` holds
    the native parameters: the scalar for the half-line, the lower
    triangular factor ``L`` for matrices, the dilation ``t`` and boost
    velocity for Lorentz cones.
    """

    cone: ConeDescriptor
    matrix: np.ndarray = field(repr=False)
    params: dict = field(repr=False)
    abs_det: float

    @functools.cached_property
    def _inverse(self):
        return np.linalg.inv(self.matrix)

    def act(self, x):
        return np.asarray(x) @ self.matrix.T

    def act_inverse(self, x):
        return np.asarray(x) @ self._inverse.T

    def act_transpose(self, w):
        """Adjoint action ``h^T w`` (used on the frequency side)."""
        return np.asarray(w) @ self.matrix

    def act_inverse_transpose(self, w):
        return np.asarray(w) @ self._inverse


def act(h, x):
    """Linear action of ``h`` on points of V."""
    return h.act(x)


def _spd_action_matrix(L):
    r = L.shape[0]
    n = r * (r + 1) // 2
    basis = vec_to_sym(np.eye(n), r)
    return sym_to_vec(L @ basis @ L.T).T


def factorize(cone, y):
    """The unique group element ``h`` with ``h e = y``.

    Half-line: the scalar ``y``. Matrices: the lower triangular Cholesky
    factor, acting by ``X -> L X L^T``. Lorentz cones: a dilation by
    ``t = sqrt(det y)`` composed with the boost taking ``e`` to ``y / t``.
    """
    y = _check_dim(cone, np.asarray(y, dtype=float))
    if y.ndim != 1:
        raise ValueError("factorize expects a single point")
    if not contains(cone, y):
        raise OutsideConeError("cannot factorize a point outside the cone")
    if cone.kind == "halfline":
        return GroupElement(cone, y.reshape(1, 1).copy(), {"scale": y[0]}, float(y[0]))
    if cone.kind == "spd":
        L = np.linalg.cholesky(vec_to_sym(y, cone.size))
        M = _spd_action_matrix(L)
        abs_det = float(np.prod(np.diag(L)) ** (cone.size + 1))
        return GroupElement(cone, M, {"L": L}, abs_det)
    m = cone.size
    t = math.sqrt(det(cone, y))
    u = y / t
    ubar = u[1:]
    boost = np.empty((m, m))
    boost[0, 0] = u[0]
    boost[0, 1:] = ubar
    boost[1:, 0] = ubar
    boost[1:, 1:] = np.eye(m - 1) + np.outer(ubar, ubar) / (u[0] + 1.0)
    return GroupElement(cone, t * boost, {"t": t, "velocity": ubar}, t**m)


# -- invariant geometry -------------------------------------------------------


def distance(cone, x, y):
    """Geodesic distance ``sqrt(sum(log(mu_k)**2))`` of the invariant metric.

    ``mu_k`` is the relative spectrum of ``y`` with respect to ``x``.
    """
    x = _check_dim(cone, x)
    y = _check_dim(cone, y)
    if not (np.all(contains(cone, x)) and np.all(contains(cone, y))):
        raise OutsideConeError("distance needs points in the cone")
    mu = relative_spectrum(cone, x, y)
    with np.errstate(divide="ignore"):
        # a vanishing relative eigenvalue means infinite distance
        return np.sqrt(np.sum(np.log(mu) ** 2, axis=-1))


def _sinhc(b):
    out = np.ones_like(b)
    big = np.abs(b) > 1e-6
    out[big] = np.sinh(b[big]) / b[big]
    out[~big] = 1.0 + b[~big] ** 2 / 6.0
    return out


def exp_map(cone, s):
    """Jordan exponential from tangent coordinates at ``e`` into the cone.

    ``distance(e, exp_map(s))`` equals ``sqrt(sum(spectral_values(s)**2))``.
    """
    s = _check_dim(cone, np.asarray(s, dtype=float))
    if cone.kind == "halfline":
        return np.exp(s)
    if cone.kind == "lorentz":
        beta = np.linalg.norm(s[..., 1:], axis=-1)
        scale = np.exp(s[..., 0])
        head = scale * np.cosh(beta)
        tail = (scale * _sinhc(beta))[..., None] * s[..., 1:]
        return np.concatenate([head[..., None], tail], axis=-1)
    w, V = np.linalg.eigh(vec_to_sym(s, cone.size))
    X = (V * np.exp(w)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return sym_to_vec(X)


def log_map(cone, y):
    """Inverse of :func:`exp_map`."""
    y = _check_dim(cone, np.asarray(y, dtype=float))
    if not np.all(contains(cone, y)):
        raise OutsideConeError("log_map needs points in the cone")
    if cone.kind == "halfline":
        return np.log(y)
    if cone.kind == "lorentz":
        t = np.sqrt(det(cone, y))
        ubar = y[..., 1:] / t[..., None]
        r = np.linalg.norm(ubar, axis=-1)
        beta = np.arcsinh(r)
        ratio = np.where(r > 1e-12, beta / np.where(r > 0, r, 1.0), 1.0)
        return np.concatenate(
            [np.log(t)[..., None], ratio[..., None] * ubar], axis=-1
        )
    w, V = np.linalg.eigh(vec_to_sym(y, cone.size))
    X = (V * np.log(w)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return sym_to_vec(X)


def _divided_exp(a, b):
    diff = a - b
    small = np.abs(diff) < 1e-8
    safe = np.where(small, 1.0, diff)
    return np.where(small, np.exp(0.5 * (a + b)), (np.exp(a) - np.exp(b)) / safe)


def exp_jacobian(cone, s):
    """Lebesgue Jacobian ``|det d exp_map(s)|`` in coordinates.

    Equals ``prod exp(mu_k) * prod_{k<l} ((e^mu_k - e^mu_l)/(mu_k - mu_l))^d``
    with ``mu`` the spectral values of ``s`` and ``d`` the Peirce
    multiplicity.
    """
    s = _check_dim(cone, np.asarray(s, dtype=float))
    mu = spectral_values(cone, s)
    jac = np.exp(np.sum(mu, axis=-1))
    d = cone.peirce
    if d == 0:
        return jac
    for k in range(cone.R):
        for l in range(k + 1, cone.R):
            jac = jac * _divided_exp(mu[..., k], mu[..., l]) ** d
    return jac


@functools.lru_cache(maxsize=None)
def _tangent_basis(kind, size):
    cone = make_cone(kind, size)
    Q, _ = np.linalg.qr(np.column_stack([cone.e, np.eye(cone.n)]))
    Q = Q[:, : cone.n]
    if Q[:, 0] @ cone.e < 0:
        Q[:, 0] *= -1
    Q = Q / math.sqrt(cone.jordan_scale)
    Q.setflags(write=False)
    return Q


def tangent_basis(cone):
    """Matrix ``Q`` taking orthonormal tangent coordinates ``u`` to ``s = Q u``.

    ``u`` is orthonormal for the invariant metric at ``e``, so
    ``distance(e, exp_map(Q u)) == |u|``; the first column points along
    ``e``, hence ``log det(exp_map(Q u)) == sqrt(R) * u[0]``.
    """
    return _tangent_basis(cone.kind, cone.size)


def random_points(cone, rng, size, radius=1.0):
    """Points ``exp(Q u)`` with ``u`` uniform in the ball of given radius."""
    u = rng.standard_normal((size, cone.n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    u *= radius * rng.random((size, 1)) ** (1.0 / cone.n)
    return exp_map(cone, u @ tangent_basis(cone).T)


def random_group_element(cone, rng, radius=1.0):
    return factorize(cone, random_points(cone, rng, 1, radius)[0])


def lebesgue_volume_ball(cone, radius, samples=1 << 16, seed=0):
    """Quasi-Monte Carlo Lebesgue volume of the invariant ball ``B_radius(e)``."""
    pts, box_volume = _ball_samples(cone, radius, samples, seed)
    return box_volume * len(pts) / samples


@functools.lru_cache(maxsize=32)
def _ball_samples_cached(kind, size, radius, samples, seed):
    from scipy.stats import qmc

    cone = make_cone(kind, size)
    if cone.kind == "halfline":
        lo, hi = np.array([math.exp(-radius)]), np.array([math.exp(radius)])
    else:
        # spectral values lie in [e^-radius, e^radius]
        bound = math.exp(radius)
        lo = np.full(cone.n, -bound)
        hi = np.full(cone.n, bound)
        lo[cone.e > 0] = math.exp(-radius)
    sampler = qmc.Sobol(cone.n, scramble=True, seed=seed)
    u = qmc.scale(sampler.random(samples), lo, hi)
    inside = contains(cone, u)
    pts = u[inside]
    keep = distance(cone, cone.e, pts) < radius
    pts = pts[keep]
    pts.setflags(write=False)
    return pts, float(np.prod(hi - lo))


def _ball_samples(cone, radius, samples=1 << 16, seed=0):
    return _ball_samples_cached(cone.kind, cone.size, float(radius), samples, seed)


def ball_bounding_box(cone, radius, samples=4096, seed=0):
    """Coordinate bounding box ``(lo, hi)`` of the invariant ball ``B_radius(e)``.

    Taken over ``exp_map`` of a seeded sample of the boundary sphere, so it
    is a close inner estimate; callers add their own margin.
    """
    if cone.kind == "halfline":
        return np.array([math.exp(-radius)]), np.array([math.exp(radius)])
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, cone.n))
    u *= radius / np.linalg.norm(u, axis=1, keepdims=True)
    # include the coordinate directions explicitly
    u = np.concatenate([u, radius * np.eye(cone.n), -radius * np.eye(cone.n)])
    pts = exp_map(cone, u @ tangent_basis(cone).T)
    return pts.min(axis=0), pts.max(axis=0)


def gamma_cone_spd(r, s):
    """Gindikin gamma function of ``spd(r)`` (used as a test oracle)."""
    return math.pi ** (r * (r - 1) / 4) * math.prod(
        special.gamma(s - k / 2) for k in range(r)
    )
