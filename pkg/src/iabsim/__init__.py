"""Stochastic-geometry simulator for multi-hop IAB backhaul."""

__version__ = "0.1.0"
