"""Nested cellular genetic search for compact MLP classifiers."""
__version__ = "0.1.0"
