"""
Polarized Reflection Separation Toolkit

Polarization physics, raw-linear {M, R, T} triple synthesis, decorrelation
losses and a two-stage optimization separator for mixed polarized raw images.
"""

__version__ = "1.0.0"
