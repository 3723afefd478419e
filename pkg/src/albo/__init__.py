"""Augmented-Lagrangian Bayesian optimization for constrained blackboxes.

Gaussian-process surrogates of each constraint drive expected-value or
expected-improvement acquisition inside an augmented-Lagrangian outer
loop, so a handful of blackbox evaluations go a long way on problems
where constraints, not the objective, are the hard part.
"""

from .acquisition import AcquisitionContext, AcquisitionScore, \
    analytic_ei_nomax, ei_gaussian, expected_sq_hinge, ey_composite, mc_ei
from .auglag import ALParams, ALValue, al_value, best_al_value, \
    update_multipliers, update_penalty
from .comparators import SannConfig, relaxed_best_curve, run_oic_random, \
    run_sann
from .gp import DesignSet, FactorizationError, GPHyper, GPSurrogate, \
    fit_gp, log_marginal_likelihood, mle_lengthscale, predict, \
    predict_batch, update_gp
from .harness import ExperimentSpec, SummaryTable, read_trace, \
    run_experiment, summarize, write_trace
from .kernels import BACKEND
from .optimizer import CandidateSet, ProgressTrace, SearchConfig, VARIANTS, \
    gen_oic_candidates, initial_design, inner_search, optim_auglag
from .problems import BlackboxError, Evaluation, Hyperrectangle, \
    OutOfBoundsError, Problem, evaluate, external_blackbox, peek, \
    toy_problem

__version__ = "0.1.0"

__all__ = [
    "ALParams", "ALValue", "AcquisitionContext", "AcquisitionScore",
    "BACKEND", "BlackboxError", "CandidateSet", "DesignSet", "Evaluation",
    "ExperimentSpec", "FactorizationError", "GPHyper", "GPSurrogate",
    "Hyperrectangle", "OutOfBoundsError", "Problem", "ProgressTrace",
    "SannConfig", "SearchConfig", "SummaryTable", "VARIANTS",
    "al_value", "analytic_ei_nomax", "best_al_value", "ei_gaussian",
    "evaluate", "expected_sq_hinge", "external_blackbox", "ey_composite",
    "fit_gp", "gen_oic_candidates", "initial_design", "inner_search",
    "log_marginal_likelihood", "mc_ei", "mle_lengthscale", "optim_auglag",
    "peek", "predict", "predict_batch", "read_trace", "relaxed_best_curve",
    "run_experiment", "run_oic_random", "run_sann", "summarize",
    "toy_problem", "update_gp", "update_multipliers", "update_penalty",
    "write_trace",
]
