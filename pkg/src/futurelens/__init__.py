"""Decomposed future-return explainer workbench for trace-driven controllers."""

__version__ = "0.1.0"
