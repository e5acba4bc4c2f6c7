"""Stiff/flexible transmission eigenvalue problems: solver, limit spectrum, asymptotic series."""
__version__ = "0.1.0"
