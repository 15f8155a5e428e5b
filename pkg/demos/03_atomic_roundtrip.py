"""
Atomic decomposition and the tube round trip
============================================

Build atoms over a lattice of the light cone, analyze a holomorphic
function on the tube into coefficients and synthesize it back.
Takes about ten seconds on one core.
"""

import numpy as np

from coneatoms import besov, cones, lattice, pipeline, tube
from coneatoms.besov import ParamSet

cone = cones.parse_cone("lorentz:3")
params = ParamSet(p=2, q=2, nu=2)
print(besov.index_gate(cone, params).to_json())

# A 64^3 frequency grid around the ball of radius 1.75 (lattice region plus mother support)
grid = pipeline.auto_grid(cone, 1.75, 64)
setup = pipeline.build_setup(
    cone, grid, lattice.Region.ball(0.75), params, delta=0.25,
    tube_cfg={"log_range": (-4.0, 2.0), "step": 0.5, "angular_radius": 1.5,
              "angular_points": 5},
)
print(f"{len(setup.lattice)} lattice points, {setup.system.size} atoms, "
      f"{len(setup.tube_grid)} heights")

rng = np.random.default_rng(1)
f = pipeline.sample_function(cone, grid, rng)
res = pipeline.roundtrip(setup, f, tol=1e-4)
print(f"frame bounds A={res['A']:.3f} B={res['B']:.3f}")
print(f"{res['iterations']} iterations, tube error {res['tube_error']:.2e}")
print(f"||d||_b / ||F||_A = {res['coefficient_ratio']:.4f}")

# Synthesis from random coefficients stays within a bracket of the sequence norm
ratios = pipeline.synthesis_ratios(setup, 3, seed=2)
print("synthesis ratios", np.round(ratios, 4), "bracket", round(pipeline.bracket(ratios), 4))
print("kernel constant", tube.calibrate_kernel_constant(cone))
