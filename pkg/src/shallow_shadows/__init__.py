"""Noise-robust shallow classical shadows on simulated noisy devices."""

__version__ = "0.1.0"
