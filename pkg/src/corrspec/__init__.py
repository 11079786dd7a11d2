"""Correlation spectra of discrete joint distributions and the bounds they imply."""
from .errors import CorrspecError
from .probcore import Alphabet, FactoredDist, JointDist, Kernel, Marginal
from .spectral import correlation_spectrum, lambda2, singular_values, tilde

__all__ = ["Alphabet", "CorrspecError", "FactoredDist", "JointDist", "Kernel", "Marginal",
           "correlation_spectrum", "lambda2", "singular_values", "tilde"]
__version__ = "0.1.0"
