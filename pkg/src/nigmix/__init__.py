"""Variational Bayes clustering with normal inverse Gaussian mixtures."""

__version__ = "0.1.0"
