"""nrlab: a numerical laboratory for the compactified phase-space geometry,
Hamiltonian flow, desk-scale quantization, and uniform Sobolev norms behind
the non-relativistic limit of the Klein-Gordon equation."""

from . import errors, flow, geometry, norms, pde, quantize, symbols

__all__ = ["errors", "flow", "geometry", "norms", "pde", "quantize", "symbols"]
__version__ = "0.1.0"
