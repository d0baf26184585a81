"""Tensor-network state preparation, gap certificates and verification."""

__version__ = "0.1.0"
