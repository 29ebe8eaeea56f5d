"""Simulation and exhaustive analysis of asynchronous reaction dynamics."""
