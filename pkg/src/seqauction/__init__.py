"""Exact equilibria of single-item externality auctions, sequential item
auctions and matroid co-circuit auctions."""

__version__ = "0.1.0"
