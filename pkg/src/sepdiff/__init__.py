"""sepdiff: scale/speed analysis and simulation of one-dimensional diffusions."""

__version__ = "0.1.0"
