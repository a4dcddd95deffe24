"""Lattice magnetic operators: cocycles, twisted convolution, finite-box spectra and parameter scans."""

__version__ = "0.1.0"
