"""Rumor detection from dynamic propagation structure and post content."""

__version__ = "0.1.0"
