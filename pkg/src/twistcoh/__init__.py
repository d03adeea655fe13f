"""Twisted cohomology on exactly representable model geometries."""

__version__ = "0.1.0"
