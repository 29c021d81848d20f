"""Universal self-supervised pre-training on heterogeneous graphs."""

__version__ = "0.1.0"
