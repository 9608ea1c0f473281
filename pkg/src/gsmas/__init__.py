"""Generalized spatial modulation link simulator with EDAS and learned antenna subset selection."""

__version__ = "0.1.0"
