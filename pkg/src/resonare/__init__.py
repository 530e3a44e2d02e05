"""Thermoacoustic Helmholtz eigenmode solvers on finite-volume meshes."""
__version__ = "0.1.0"
