"""Band structures, Dirac points and domain-wall edge states for honeycomb Schrödinger operators."""
__version__ = "0.1.0"
