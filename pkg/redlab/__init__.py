"""Queue-length laws of weighted power-of-two redundancy systems."""

__version__ = '0.1.0a'
