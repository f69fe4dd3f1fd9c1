"""Exact, asymptotic and simulated bias of empirical risk for histogram classifiers."""

__version__ = "1.0.0"
