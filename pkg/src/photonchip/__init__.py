"""Desk-scale simulator of an eight-mode programmable squeezed-light sampler."""

__version__ = "0.1.0"
