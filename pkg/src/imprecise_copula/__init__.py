"""Imprecise Copula - multimodel copula inference with one-pass uncertainty propagation."""

__version__ = "0.1.0"

from .bayes_inference import (
    CopulaCandidate,
    InferenceConfig,
    MarginalCandidate,
    McmcConfig,
    ModelPosterior,
    PriorSpec,
    infer_models,
    log_evidence,
    map_estimate,
    mcmc_posterior,
    posterior_model_probabilities,
)
from .config import RunConfig, load_run_config
from .copula_core import (
    CopulaFamily,
    CopulaSpec,
    copula_cdf,
    copula_log_pdf,
    copula_sample,
    h_function,
    h_inverse,
    kendall_tau,
    tau_to_param,
)
from .errors import ImpreciseCopulaError
from .hierarchy import (
    BlockEnsembles,
    ConditionalCopulaSet,
    JointEnsemble,
    draw_marginal_pairs,
    infer_block_ensembles,
    infer_copula_conditional,
    infer_marginals,
)
from .marginal_core import MarginalFamily, MarginalSpec, pseudo_observations
from .propagation import (
    CdfBand,
    WeightedRun,
    cdf_band,
    optimal_density,
    optimal_product_density,
    propagate,
    reweighted_expectation,
)
from .vine import VineKind, VineSpec, vine_log_pdf, vine_sample

__all__ = [
    "BlockEnsembles",
    "CdfBand",
    "ConditionalCopulaSet",
    "CopulaCandidate",
    "CopulaFamily",
    "CopulaSpec",
    "ImpreciseCopulaError",
    "InferenceConfig",
    "JointEnsemble",
    "MarginalCandidate",
    "MarginalFamily",
    "MarginalSpec",
    "McmcConfig",
    "ModelPosterior",
    "PriorSpec",
    "RunConfig",
    "VineKind",
    "VineSpec",
    "WeightedRun",
    "cdf_band",
    "copula_cdf",
    "copula_log_pdf",
    "copula_sample",
    "draw_marginal_pairs",
    "h_function",
    "h_inverse",
    "infer_block_ensembles",
    "infer_copula_conditional",
    "infer_marginals",
    "infer_models",
    "kendall_tau",
    "load_run_config",
    "log_evidence",
    "map_estimate",
    "mcmc_posterior",
    "optimal_density",
    "optimal_product_density",
    "posterior_model_probabilities",
    "propagate",
    "pseudo_observations",
    "reweighted_expectation",
    "tau_to_param",
    "vine_log_pdf",
    "vine_sample",
]
