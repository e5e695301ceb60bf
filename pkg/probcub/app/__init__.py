"""
probcub Application

Bayesian cubature: probabilistic numerical integration with calibrated uncertainty.
"""

__version__ = "0.1.0"
