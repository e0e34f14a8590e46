"""Block-graph generative modeling of molecular binders."""

__version__ = "0.1.0"
