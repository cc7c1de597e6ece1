"""Sequential multi-agent dynamic algorithm configuration."""

__version__ = "0.1.0"
