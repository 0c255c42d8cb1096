"""One-dimensional TDDFT model of a soft-Coulomb cluster with t-SURFF photoelectron spectra."""

__version__ = "0.1.0"
