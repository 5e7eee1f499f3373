"""Null-controllability toolkit for the heat equation on an infinite strip."""

__version__ = "0.1.0"
