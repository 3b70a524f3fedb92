"""Memory-one strategies for the iterated Prisoner's Dilemma and the invincibility condition."""

from .evolution import EvolutionConfig, Population, fitness_oracle, moran_step, run_evolution
from .invincibility import (classify_edge_case, find_counterexample, sample_cloud,
                            verify_invincible_empirically)
from .markov import determinants, stationary_analytic, stationary_cesaro
from .strategies import (DEFAULT_PAYOFFS, MemoryOneStrategy, PayoffMatrix, is_invincible,
                         is_semi_cooperative_invincible, is_zero_determinant, lookup,
                         make_extortionate, named_catalog, parse_literal)
from .tournament import MatchConfig, play_match, run_tournament

__all__ = [
    "DEFAULT_PAYOFFS", "EvolutionConfig", "MatchConfig", "MemoryOneStrategy", "PayoffMatrix",
    "Population", "classify_edge_case", "determinants", "find_counterexample", "fitness_oracle",
    "is_invincible", "is_semi_cooperative_invincible", "is_zero_determinant", "lookup",
    "make_extortionate", "moran_step", "named_catalog", "parse_literal", "play_match",
    "run_evolution", "run_tournament", "sample_cloud", "stationary_analytic",
    "stationary_cesaro", "verify_invincible_empirically",
]
