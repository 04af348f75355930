"""Numerical core: spectral fields, critical value, linearization, steady states and trajectories."""
