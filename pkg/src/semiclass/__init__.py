"""Semiclassical ground states of doubly characteristic operators.

Weyl quantization on periodic grids, exact Moyal products of polynomial
symbols, shift-invert eigensolvers and a harness that measures how the
L^p norms of ground states scale with h.
"""

from .analysis import ScalingReport, lp_norm_grid, scaling_sweep, theoretical_exponent
from .eigensolve import EigenPair, eigs_near, ground_cluster
from .hermite import OscillatorState, lp_constant, lp_norm_exact
from .moyal import HSeries, poisson_bracket, star_commutator, star_product
from .quantize import OperatorMatrix, PhaseSpaceGrid, ScalingParams, weyl_quantize
from .symbols import CallableSymbol, PolySymbol, check_assumptions, parse_symbol

__version__ = "0.1.0"

__all__ = [
    "CallableSymbol",
    "EigenPair",
    "HSeries",
    "OperatorMatrix",
    "OscillatorState",
    "PhaseSpaceGrid",
    "PolySymbol",
    "ScalingParams",
    "ScalingReport",
    "check_assumptions",
    "eigs_near",
    "ground_cluster",
    "lp_constant",
    "lp_norm_exact",
    "lp_norm_grid",
    "parse_symbol",
    "poisson_bracket",
    "scaling_sweep",
    "star_commutator",
    "star_product",
    "theoretical_exponent",
    "weyl_quantize",
]
