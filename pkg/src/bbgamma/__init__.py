"""Generalized Beta-Bernoulli logistic classifiers: a smooth, sharpness-controlled
approximation to the 0-1 loss, fitted by annealed gradient ascent with coordinate
probing, in linear and RBF-kernel form with an optional sparsity prior.
"""

__version__ = "0.1.0"

from ._backend import COMPILED
from .data import Dataset, SplitPlan, augment, inject_label_noise, load_dataset, make_splits, standardize
from .eval import ContingencyPair, error_percent, mcnemar_z, pooled_mcnemar, zero_one_total
from .kernel import KernelModel, KernelSpec, gram, grad_alphas, mu_kbb, support_count
from .losses import LossKind, PlateauConstants, eval_loss, loss_grad, zero_one_rescaling
from .methods import METHODS, cross_validate, get_method
from .model import BBHyper, LinearModel, asymptotic_init, grad_hyper, grad_weights, log_likelihood, mu_bbgamma
from .optimizer import FitReport, SlaConfig, anneal, find_sla_solution, grad_desc_in_range, vanilla_grad_desc
from .priors import L2Prior, MixturePrior, grad_prior, hard_em_update, log_prior
from .slam import fit_bblr4, slam_tune
from .tables import reproduce_table

__all__ = [
    "COMPILED", "Dataset", "SplitPlan", "augment", "inject_label_noise", "load_dataset", "make_splits",
    "standardize", "ContingencyPair", "error_percent", "mcnemar_z", "pooled_mcnemar", "zero_one_total",
    "KernelModel", "KernelSpec", "gram", "grad_alphas", "mu_kbb", "support_count", "LossKind",
    "PlateauConstants", "eval_loss", "loss_grad", "zero_one_rescaling", "METHODS", "cross_validate",
    "get_method", "BBHyper", "LinearModel", "asymptotic_init", "grad_hyper", "grad_weights",
    "log_likelihood", "mu_bbgamma", "FitReport", "SlaConfig", "anneal", "find_sla_solution",
    "grad_desc_in_range", "vanilla_grad_desc", "L2Prior", "MixturePrior", "grad_prior", "hard_em_update",
    "log_prior", "fit_bblr4", "slam_tune", "reproduce_table",
]
