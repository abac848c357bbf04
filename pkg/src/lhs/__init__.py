"""Latent-space search over DSL scoring heuristics for combinatorial optimization."""

__version__ = "0.1.0"
