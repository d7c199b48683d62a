"""Frequency-domain watermark presence detection workbench."""

__version__ = "0.1.0"
