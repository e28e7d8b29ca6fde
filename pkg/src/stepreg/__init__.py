"""Bayesian binary regression under uniform mixtures of step functions.

A step function on [0, 1] is drawn by choosing a split count m from a
hierarchy prior, m split positions uniformly at random, and m + 1 heights
uniformly at random.  This package provides the exact and Monte Carlo
predictive probabilities of binary response data under that prior, a
reversible-jump sampler for the posterior over split configurations, the
entropy functional governing the predictive decay rate, and an experiment
toolkit for measuring that decay (zone scans, rate-function estimation,
urn-based information inequalities).
"""

from stepreg.model import (
    DataSet,
    GridFunction,
    StepFunction,
    average_onto,
    cell_counts,
    l1_distance,
    l2sq_distance,
    poisson_count,
    sample_dataset,
    thin_dataset,
)
from stepreg.kernel import HeightPosterior, height_posterior, log_Z_u, log_beta, sample_heights
from stepreg.predictive import (
    EstimateWithError,
    GapDecomposition,
    exact_log_Z_m,
    log_Z_star,
    mc_log_Z_m,
    model_posterior,
)
from stepreg.sampler import (
    ChainConfig,
    HierarchyPrior,
    TuningParams,
    log_target,
    posterior_l1_samples,
    posterior_mean,
    run_chain,
)
from stepreg.entropy import shannon, entropy_functional, concavity_gap
from stepreg.urn import (
    filter_q,
    mixing_distance,
    recharge_prob,
    relative_entropy_terms,
    simulate_urn,
)

__version__ = "0.1.0"
