"""Quantum detector design by semidefinite programming.

Worst-case a-posteriori and average joint error criteria, with optional
inconclusive outcome and classical readout noise, plus operator-sum
channel design for a fixed measurement.
"""
from .certify import Certificate, certify_avg_joint, certify_inconclusive, certify_wc_posterior
from .closed_form import (beta_threshold, gamma_equal_weights, gamma_noisy_formula, gamma_noisy_limit,
                          pure_residual_wc, single_pure_wc, single_pure_wc_noisy, two_state_avg_joint)
from .design import (DesignReport, DesignSettings, SolverFailure, solve_avg_joint, solve_wc_posterior,
                     solve_wc_posterior_inconclusive, solve_wc_posterior_noisy)
from .ensemble import EnsembleError, StateEnsemble, two_state_example
from .metrics import ProbReport, evaluate
from .osr import kraus_from_x, solve_fixed_povm_design, standard_basis
from .povm import NoiseModel, Povm, noisy_povm
from .sdp import SdpProblem, SdpSettings, SdpSolution, solve, solve_feasibility
from .sweep import run_sweep

__version__ = "0.1.0"
