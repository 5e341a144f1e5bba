"""Multitask masked-attention transformer for tabular data, with a
correlation-controlled synthetic multitask benchmark."""

__version__ = "0.1.0"
