"""Bayesian inference for a flexible cure rate survival model.

A reparameterized competing-cause family whose population survival
(1 + gamma*vt*c**(gamma*vt)*F**lam)**(-1/gamma) nests the mixture,
promotion-time and negative binomial cure models.  Inference runs a
MALA-within-Gibbs kernel inside a Metropolis-coupled (parallel tempering)
ensemble, with Bayesian FDR control for classifying censored subjects as
cured.
"""

from .analysis import (CureCurve, FdrDecision, TraceStore, cure_curve,
                       fdr_control, hdi, map_estimate, psrf, susceptible_prob)
from .gradients import (complete_loglik, grad_complete_loglik,
                        grad_log_posterior, log_joint_posterior)
from .likelihood import CureRateEvaluator
from .model import (C_CONST, Dataset, DegenerateCureError,
                    InfeasibleParamsError, LatentState, ModelParams,
                    cure_prob, link_theta, pop_density, pop_survival,
                    susceptible_parts, weibull_cdf, weibull_pdf)
from .priors import (PriorHyperparams, log_prior, log_prior_heated,
                     preset_hyperparams, sample_initial)
from .sampler import (ChainState, Mc3Config, Mc3Result, ProposalScales,
                      adapt_scales, gibbs_latent, init_chain_state,
                      mala_step, mh_single_site_sweep, run_chain, run_mc3,
                      swap_log_prob, temperature_ladder)
from .simulate import (SCENARIOS, Scenario, calibrate_censoring, generate,
                       invert_susceptible_time)

__version__ = "0.1.0"
