"""Hyperbolic-lab: combinatorial and symbolic structures of hyperbolic toy systems."""
