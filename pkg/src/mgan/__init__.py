"""Multi-granularity alignment networks for coarse-to-fine aspect sentiment transfer."""

__version__ = "0.1.0"
