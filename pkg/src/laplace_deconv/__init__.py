"""Deconvolution of discrete mixing measures under Laplace and Gaussian noise.

Modules: measures, kernels, distances, approximation, entropy, posterior,
rates, cli.
"""

__version__ = "0.1.0"
