"""Exact sampling and arm-event analysis of the planar random walk loop soup."""

__version__ = "0.1.0"
