"""Scattering, noise and synthesis tools for nonreciprocal coupled-mode networks."""

__version__ = "0.1.0"
