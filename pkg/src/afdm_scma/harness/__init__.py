"""Experiment configuration, simulation chains and Eb/N0 sweeps."""
