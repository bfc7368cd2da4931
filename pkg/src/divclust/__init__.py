"""Diversity-aware k-median / k-means: feasibility engines, FPT approximation,
local search baselines, bicriteria composition and brute-force oracles."""

from .core import (MEANS, MEDIAN, DivClustError, FacilityClass, GroupSystem, InfeasibleError, MetricInstance,
                   Requirements, Solution, WeightedClientSet, coverage, evaluate_cost, make_solution,
                   partition_classes, satisfies)
from .feasibility import (ConstraintPattern, dp_feasible, dp_state_count, enumerate_feasible_patterns,
                          find_feasible_picks, lp_feasible, lp_round, lp_solve_fractional, pattern_to_facilities,
                          pattern_to_solution)
from .coreset import build_coreset, coreset_size
from .fpt import (FictitiousExtension, PartitionInstance, candidate_set, discretize, extend_with_fictitious,
                  improv, maximize_improv, solve_divkmed_3apx, solve_divkmed_fpt, solve_kmed_kpm)
from .heuristics import baseline, kmeanspp_best_of, kmeanspp_seed, local_search_ls0, local_search_ls1, ls0_best_of
from .compose import best_k_of_mk, bicriteria_2k, halfball_pick_3
from .oracle import exact_divkmed, exact_feasible_multisets, exact_submodular_max, feasible_subset_exists
from .data import generate_synthetic, load_problem, synthetic_problem

__version__ = "0.1.0"
