"""Reactive sit-to-stand assistance: fuzzy supervision, control modes and a synthetic subject."""

__version__ = "0.1.0"
