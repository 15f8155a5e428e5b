"""
Extension to the tube over the half-line
========================================

The tube over (0, inf) is the upper half-plane. A signal whose spectrum
lives in [1, 2] extends holomorphically by damping the spectrum with
exp(-y w).
"""

import math

import numpy as np

from coneatoms import cones, spectral, tube
from coneatoms.besov import ParamSet

half = cones.parse_cone("halfline")
grid = spectral.FrequencyGrid.from_box([0.0], [4.0], 4096)
f = spectral.GridFunction(grid, spectrum=spectral.interval_indicator(grid, 1.0, 2.0))

# Value at x = 0 against the Laplace integral (e^-y - e^-2y) / y
origin = grid.N // 2
for y in (0.5, 1.0, 2.0):
    F = tube.extend(f, np.array([y]), half)
    got = F.samples[origin].real / tube.transform_constant(1)
    print(f"y={y}: {got:.10f}  exact {(math.exp(-y) - math.exp(-2 * y)) / y:.10f}")

# Boundary values come back as y -> 0
for t in (1.0, 0.5, 0.25, 0.125):
    print(f"t={t:<6} ||F(. + it) - f|| = {(tube.extend(f, np.array([t]), half) - f).norm(2):.4f}")

# The Bergman norm with weight y^0: int_1^2 dw / (2w) = ln(2)/2.
# A fine grid keeps the half-weight endpoints of the indicator harmless.
fine = spectral.FrequencyGrid.from_box([0.0], [4.0], 1 << 16)
g = spectral.GridFunction(fine, spectrum=spectral.interval_indicator(fine, 1.0, 2.0))
heights = tube.log_radial_heights(half, fine, (-30.0, 4.0), 0.05)
norm2 = tube.bergman_norm(tube.extend_full(g, heights), ParamSet(2, 2, 1)) ** 2
print(f"||F||^2 = {norm2:.6f}, ln2/2 = {math.log(2) / 2:.6f}")

# Kernel constant: closed form and tube quadrature, both near 1/pi
print("c (laplace) =", tube.calibrate_kernel_constant(half))
print("c (direct)  =", tube.calibrate_kernel_constant(half, method="direct"))
print("B(i, i) with c = 1/pi:", tube.bergman_kernel(half, np.array([1j]), np.array([1j]),
                                                     1 / math.pi))
