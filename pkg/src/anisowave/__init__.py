"""Anisotropic wavelet analysis of space-time regularity."""
