"""Crossing weights of multiple SLE from contour-integral solutions of the
null-state system, organized around arc connectivity diagrams and the meander
matrix."""

__version__ = "0.1.0"
