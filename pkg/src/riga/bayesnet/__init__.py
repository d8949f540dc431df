"""Discrete Bayesian networks: discretization, BIC, tabu search, blankets."""
from .compare import BnOptions, compare_structures, mutual_information, select_by_label_mi, write_bn_outputs
from .discrete import ColumnRule, DiscreteData, Discretizer, column_rule, discretize, fit_discretizer
from .graph import (
    CycleError,
    Dag,
    blanket_dot,
    blanket_report,
    blanket_subgraph,
    markov_blanket,
    markov_equivalent,
    skeleton,
    to_dot,
    v_structures,
)
from .params import Cpt, fit_cpts, sample_from_bn
from .score import FamilyScorer, bic_score, family_counts, family_loglik, family_score, loglik
from .search import Move, SearchConfig, SearchResult, move_delta, neighbor_moves, tabu_search
