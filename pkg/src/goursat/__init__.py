"""Characteristic (Goursat) problems for quasilinear wave systems on two
intersecting null hypersurfaces, with the reduced vacuum equations as the
main application."""

__version__ = "0.1.0"
