"""Weak-value vs standard beam-deflection simulator and inference toolkit."""

__version__ = "0.1.0"
