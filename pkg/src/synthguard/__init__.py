"""GAN-based synthetic time-series generation with privacy auditing."""

__version__ = "0.1.0"
