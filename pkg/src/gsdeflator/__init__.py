"""Generalized supermartingale deflators on finite probability spaces."""

__version__ = "0.1.0"
