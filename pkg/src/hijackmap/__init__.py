"""Hijacking-report classification and incident mapping toolkit."""

__version__ = "0.1.0"
