"""Anchor-based sparse attention for graph transformers."""

__version__ = "0.1.0"
