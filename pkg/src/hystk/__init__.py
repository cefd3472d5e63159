"""hystk: generalized multi-state relays, hysteresis superpositions,
impulsive Markov transition solvers and a relay-coupled minimax game."""

from ._kernels import backend
from .geometry import BoundaryFacet, HalfSpace, Region, Signal
from .hysteresis import (
    RelayFamily,
    analyze_monotropy,
    apply,
    check_local_wipeout,
    monotropy_distance,
    preisach_family,
    preisach_grid,
    preorder_leq,
)
from .markov import (
    ImpulsiveSystem,
    ImpulseSurface,
    MarkovField,
    SemiFlow,
    TransitionMatrix,
    detect_impulse_times,
    enumerate_paths,
    fundamental_matrix_product,
    fundamental_matrix_series,
    propagate,
    stochastic_hysteresis,
    stochastic_relay_output,
)
from .relay import RelaySpec, StateId, classic_relay, evolve, output_at, triangle_relay, validate
from .game import GameSpec, SpatialGrid, extract_policy, profile_transition, solve

__version__ = "0.1.0"

__all__ = [
    "backend",
    "BoundaryFacet", "HalfSpace", "Region", "Signal",
    "RelayFamily", "analyze_monotropy", "apply", "check_local_wipeout",
    "monotropy_distance", "preisach_family", "preisach_grid", "preorder_leq",
    "ImpulsiveSystem", "ImpulseSurface", "MarkovField", "SemiFlow",
    "TransitionMatrix", "detect_impulse_times", "enumerate_paths",
    "fundamental_matrix_product", "fundamental_matrix_series", "propagate",
    "stochastic_hysteresis", "stochastic_relay_output",
    "RelaySpec", "StateId", "classic_relay", "evolve", "output_at",
    "triangle_relay", "validate",
    "GameSpec", "SpatialGrid", "extract_policy", "profile_transition", "solve",
]
