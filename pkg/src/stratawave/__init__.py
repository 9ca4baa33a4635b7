"""stratawave: spectral solver and verification suite for multilayer viscous
traveling-wave free-boundary Stokes flow."""

__version__ = "0.1.0"
