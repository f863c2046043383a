"""Rozansky-Witten toolkit: Weyl-algebra Fedosov recursion, stable graphs and
their weights, a finite-dimensional BV model of the RG flow, leading-order
heat-kernel checks and the partition-function assembler."""

__version__ = "0.1.0"
