"""Desk-scale open citation index built from Crossref-style metadata dumps."""

__version__ = "0.1.0"
