"""Analytic score of the heated complete-data log posterior.

Vectors follow the canonical coordinate order
(gamma, lam, alpha1, alpha2, beta0, ..., betak).  The likelihood part scales
linearly in the heat h because the heated complete likelihood is the
complete likelihood raised to the power h; the prior score is the heated
prior's score under the same convention.
"""

import numpy as np

from .likelihood import CureRateEvaluator
from .model import Dataset, InfeasibleParamsError, LatentState, ModelParams
from .priors import PriorHyperparams, grad_log_prior_unnorm, log_prior_unnorm

__all__ = [
    "complete_loglik",
    "log_joint_posterior",
    "grad_complete_loglik",
    "grad_log_posterior",
]


def _censored_ind(latent, evaluator: CureRateEvaluator) -> np.ndarray:
    ind = latent.ind if isinstance(latent, LatentState) else np.asarray(latent)
    return ind[evaluator.censored_index]


def complete_loglik(params: ModelParams, data: Dataset, latent,
                    evaluator: CureRateEvaluator = None) -> float:
    """log L_c(params; data, latent); -inf at zero-likelihood points."""
    ev = evaluator if evaluator is not None else CureRateEvaluator(data)
    pe = ev.evaluate(params)
    if not pe.ok:
        return -np.inf
    return ev.complete_loglik(pe, _censored_ind(latent, ev))


def log_joint_posterior(params: ModelParams, data: Dataset, latent,
                        hp: PriorHyperparams,
                        evaluator: CureRateEvaluator = None) -> float:
    """Unnormalized log joint posterior log L_c + log prior (unheated)."""
    lp = log_prior_unnorm(params, hp)
    if lp == -np.inf:
        return -np.inf
    return complete_loglik(params, data, latent, evaluator) + lp


def grad_complete_loglik(params: ModelParams, data: Dataset, latent,
                         heat: float = 1.0,
                         evaluator: CureRateEvaluator = None) -> np.ndarray:
    """Gradient of h * log L_c at a feasible point.

    Raises
    ------
    InfeasibleParamsError
        When the point is infeasible for some observation, so no gradient
        exists (the sampler maps such points to log density -inf instead).
    """
    ev = evaluator if evaluator is not None else CureRateEvaluator(data)
    pe = ev.evaluate(params, need_grad=True)
    if not pe.ok:
        raise InfeasibleParamsError("no gradient at an infeasible parameter point")
    return heat * ev.weighted_grad(pe, _censored_ind(latent, ev))


def grad_log_posterior(params: ModelParams, data: Dataset, latent,
                       hp: PriorHyperparams, heat: float = 1.0,
                       evaluator: CureRateEvaluator = None) -> np.ndarray:
    """Gradient of the heated log posterior of params conditional on latent.

    Equals h * (grad log L_c + grad log prior) under the convention that
    heating raises every posterior factor to the power h.
    """
    g = grad_complete_loglik(params, data, latent, heat=heat, evaluator=evaluator)
    return g + heat * grad_log_prior_unnorm(params, hp)
