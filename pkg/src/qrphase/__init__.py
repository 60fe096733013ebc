"""Desk-scale detection of topological phase transitions in a
bond-alternating XXZ chain: exact sector-Lanczos ground states are pushed
through a disordered Floquet circuit in the time-crystal regime, local
Z observables become feature vectors, and t-SNE plus Gaussian-mixture
clustering recovers the phase diagram, cross-checked against a
partial-reflection many-body invariant."""

__version__ = "0.1.0"
