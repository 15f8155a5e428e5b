"""Atomic decompositions of Besov and Bergman spaces over symmetric cones.

Submodules
----------
cones       cone descriptors, determinants, the triangular group, invariant distance
lattice     (delta, lambda)-lattices and their packing / covering checks
spectral    frequency grids, unitary FFT transforms, partitions of unity
besov       Besov and sequence-space norms, index gates
tube        Fourier-Laplace extension, Bergman norms, Bergman kernel
atoms       atom systems, frame analysis and synthesis, tube push-forward
crcompare   structural constants and the threshold comparison
pipeline    end-to-end assembly used by the CLI and the demos
cli         ``coneatoms`` command line
"""

from .besov import IndexReport, ParamSet, index_gate
from .cones import ConeDescriptor, make_cone, parse_cone

__version__ = "0.1.0"

__all__ = ["ConeDescriptor", "IndexReport", "ParamSet", "index_gate", "make_cone", "parse_cone"]
