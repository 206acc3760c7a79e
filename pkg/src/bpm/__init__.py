"""Zero-existence certification and root finding for maps on boxes, balls and the Hilbert cube."""

__version__ = "0.1.0"
