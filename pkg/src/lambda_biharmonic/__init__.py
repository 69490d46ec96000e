"""Extrinsic geometry and lambda-biharmonic residual checks for hypersurfaces
in L^m(c) x R."""

__version__ = "0.1.0"
