"""
phase_traffic
=============

Two-phase (free / congested) traffic models with exact Riemann solvers, point
constraints on the flux at x = 0, invariant-domain and total-variation
analyses, and a wave-front-tracking simulator.
"""

__version__ = "0.1.0"
