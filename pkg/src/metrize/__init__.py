"""Invariance and metrizability checks for SO(3)-invariant affine connections."""

__version__ = "0.1.0"
