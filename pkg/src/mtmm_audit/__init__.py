"""Multiplicity and search-space auditing for observational studies in a meta-analysis."""

__version__ = "0.1.0"
