"""Numerical laboratory for geodesics, cut loci and Klingenberg-type dichotomies on surfaces."""

__version__ = "0.1.0"
