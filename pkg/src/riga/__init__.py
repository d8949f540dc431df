"""Imbalanced tabular data to images, generative augmentation, classification and Bayesian-network analysis."""

__version__ = "0.1.0"
