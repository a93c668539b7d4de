"""Life trajectory activity classification and corpus analytics."""

__version__ = "0.1.0"
