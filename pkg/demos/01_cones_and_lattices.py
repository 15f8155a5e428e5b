"""
Cones, invariant distance and lattices
======================================

Three symmetric cones: the positive half-line, the light cone in R^3 and
2 x 2 positive-definite matrices (stored as vectors in R^3).
"""

import numpy as np

from coneatoms import cones, lattice

half, light, spd = (cones.parse_cone(s) for s in ("halfline", "lorentz:3", "spd:2"))
for c in (half, light, spd):
    print(f"{str(c):10s} n={c.n} R={c.R} e={c.e} phi(e)={c.phi_e:.4f}")

# The triangular group moves e to any point of the cone. For the matrix cone
# this is a Cholesky factor, acting by y -> L y L^T.
y = cones.sym_to_vec(np.array([[4.0, 2.0], [2.0, 2.0]]))
h = cones.factorize(spd, y)
print("L =", h.params["L"].tolist(), " |det| of the action =", h.abs_det)
print("h.e == y:", np.allclose(h.act(spd.e), y))

# The determinant is relatively invariant: det(h.e) = |det h|^(R/n)
print("det(h.e) =", cones.det(spd, h.act(spd.e)), " |det h|^(R/n) =", h.abs_det ** (2 / 3))

# Distances are unchanged by the group
rng = np.random.default_rng(0)
a, b = cones.random_points(light, rng, 2, 1.0)
g = cones.random_group_element(light, rng, 2.0)
print("d(a, b) =", cones.distance(light, a, b), " d(ga, gb) =",
      cones.distance(light, g.act(a), g.act(b)))

# A (delta, lambda)-lattice: greedy 2 delta separation, lambda delta covering
lat = lattice.build_lattice(light, delta=0.5, lam=2.0, region=lattice.Region.ball(2.0))
rep = lattice.verify_covering(lat, probes=5000)
print(f"{len(lat)} points, min separation {lat.verified_packing:.4f}, "
      f"covered {100 * rep.fraction:.2f}% (worst gap {rep.max_nearest:.3f} <= {rep.radius})")
