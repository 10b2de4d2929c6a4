"""Offline minimum-time reference generation for a PD-controlled biaxial stage."""

__version__ = "0.1.0"
