"""semtab: semantic embedding initialization for sequential transaction models."""

__version__ = "0.1.0"
