"""Electromagnetic fields in absorbing, frequency-dependent media via an electric vector potential."""
__version__ = "0.1.0"
