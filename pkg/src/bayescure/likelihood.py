"""Vectorized complete-data likelihood machinery for one dataset.

The complete log likelihood given latent susceptibility indicators I is

    sum_{events} log f_P(y_i)
      + sum_{censored} [(1 - I_i) * log p0(x_i) + I_i * log(S_P(y_i) - p0(x_i))],

and the chain kernels additionally need its gradient in
(gamma, lam, alpha1, alpha2, beta).  ``CureRateEvaluator`` reorders the data
once (events first, censored after) and caches the pieces that depend on a
single parameter block, so single-site Metropolis updates only recompute what
changed: Weibull terms on (alpha1, alpha2), link terms on beta, and the
survival/cure combination on every update.  The three log1p-power
evaluations (S_P at events, S_P and p0 at censored rows) run fused in one
array pass.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .model import Dataset, ModelParams, phi_parts

__all__ = ["CureRateEvaluator", "PointEval"]

_ERRSTATE = dict(divide="ignore", invalid="ignore", over="ignore")


@dataclass(frozen=True, eq=False)
class WeibParts:
    alpha1: float
    alpha2: float
    logF: np.ndarray     # all rows, events first
    logf_e: np.ndarray   # event rows only
    z: np.ndarray
    lay: np.ndarray      # log(alpha1 * y)
    sinv: np.ndarray     # 1 / expm1(z)


@dataclass(frozen=True, eq=False)
class LinkParts:
    beta: np.ndarray
    th: np.ndarray       # all rows, events first
    lth: np.ndarray
    finite: bool


@dataclass
class PointEval:
    """All per-observation likelihood terms at one parameter point.

    ``ok`` is False when the point is structurally infeasible for the data
    (negative survival base, overflowed link, or a non-finite event density);
    the sampler treats such points as log density -inf.  A valid point can
    still carry -inf censored terms (zero cure mass or zero susceptible
    mass), which only enter the likelihood through latent-indicator
    selection.
    """

    params: ModelParams
    weib: WeibParts
    link: LinkParts
    ok: bool
    sum_logfP: float = -np.inf
    logSP_c: np.ndarray = None
    logp0_c: np.ndarray = None
    logSmp_c: np.ndarray = None
    grad: "GradParts" = None


@dataclass
class GradParts:
    """Per-observation gradient pieces, to be weighted by the latent vector."""

    ev: np.ndarray          # (k+5,) summed gradient of the event block
    p0_gamma: np.ndarray    # censored arrays
    p0_bf: np.ndarray
    smp_gamma: np.ndarray
    smp_lam: np.ndarray
    smp_a1: np.ndarray
    smp_a2: np.ndarray
    smp_bf: np.ndarray


def _log1mexp(d):
    """log(1 - exp(d)) for d <= 0 elementwise (callers silence warnings)."""
    out = np.log1p(-np.exp(d))
    near = d > -0.693
    if near.any():
        out[near] = np.log(-np.expm1(d[near]))
    return out


class CureRateEvaluator:
    """Likelihood and gradient evaluation bound to one dataset."""

    def __init__(self, data: Dataset):
        self.data = data
        ev = data.delta == 1
        self.event_index = np.flatnonzero(ev)
        self.censored_index = np.flatnonzero(~ev)
        self.n_e = int(self.event_index.size)
        self.n_c = int(self.censored_index.size)
        order = np.concatenate([self.event_index, self.censored_index])
        self.y = data.y[order]
        self.x = np.ascontiguousarray(data.x[order])
        self.x_c = self.x[self.n_e:]
        self.k = data.k

    # -- block caches -------------------------------------------------------

    def weib_parts(self, alpha1, alpha2) -> WeibParts:
        with np.errstate(**_ERRSTATE):
            ay = alpha1 * self.y
            z = ay ** alpha2
            lay = np.log(ay)
            logF = np.log1p(-np.exp(-z))
            small = z < 0.693
            if small.any():
                logF[small] = np.log(-np.expm1(-z[small]))
            sinv = 1.0 / np.expm1(z)
            ne = self.n_e
            logf_e = (np.log(alpha2) + np.log(alpha1)
                      + (alpha2 - 1.0) * lay[:ne] - z[:ne])
        return WeibParts(alpha1, alpha2, logF, logf_e, z, lay, sinv)

    def link_parts(self, beta) -> LinkParts:
        beta = np.asarray(beta, dtype=float)
        with np.errstate(**_ERRSTATE):
            lth = beta[0] + self.x @ beta[1:]
            th = np.exp(lth)
        return LinkParts(beta, th, lth, bool(np.isfinite(th).all()))

    # -- point evaluation ---------------------------------------------------

    def evaluate(self, params: ModelParams, need_grad=False,
                 weib: WeibParts = None, link: LinkParts = None) -> PointEval:
        """Evaluate all likelihood terms (optionally gradient pieces) at a point."""
        gamma, lam = params.gamma, params.lam
        if weib is None:
            weib = self.weib_parts(params.alpha1, params.alpha2)
        if link is None:
            link = self.link_parts(params.beta)
        pe = PointEval(params=params, weib=weib, link=link, ok=False)
        if not link.finite or not (lam > 0.0) or gamma == 0.0:
            return pe
        ne = self.n_e

        with np.errstate(**_ERRSTATE):
            lv = link.lth + (gamma / np.e) * link.th
            lw = lv + lam * weib.logF
            u = np.exp(np.concatenate((lw, lv[ne:])))
            if need_grad:
                phi, q, pg, feasible = phi_parts(u, gamma, need_grad=True)
            else:
                phi, feasible = phi_parts(u, gamma)
            if not feasible:
                return pe

            n = self.y.size
            tail = -(1.0 + gamma) * phi[:ne] if gamma != -1.0 else 0.0
            logfP_e = (np.log(lam) + lv[:ne] + (lam - 1.0) * weib.logF[:ne]
                       + weib.logf_e + tail)
            # +inf or NaN event density marks the point unusable.
            if not np.all(logfP_e < np.inf):
                return pe

            logSP_c = -phi[ne:n]
            logp0_c = -phi[n:]
            d = np.minimum(logp0_c - logSP_c, 0.0)
            logSmp_c = logSP_c + _log1mexp(d)
            neg = np.isneginf(logSP_c)
            if neg.any():
                logSmp_c[neg] = -np.inf

            pe.ok = True
            pe.sum_logfP = float(logfP_e.sum())
            pe.logSP_c = logSP_c
            pe.logp0_c = logp0_c
            pe.logSmp_c = logSmp_c

            if need_grad:
                pe.grad = self._grad_parts(params, weib, link, phi, q, pg, d)
        return pe

    def _grad_parts(self, params, weib, link, phi, q, pg, d):
        gamma, lam = params.gamma, params.lam
        a1, a2 = params.alpha1, params.alpha2
        one_pg = 1.0 + gamma
        ne, n = self.n_e, self.y.size

        # Weibull derivative helpers.
        zs = weib.z * weib.sinv
        dF1 = (a2 / a1) * zs
        dF2 = weib.lay * zs
        the = link.th / np.e

        # Event block: gradient of log f_P summed over events.
        q_e = q[:ne]
        lin_e = 1.0 - one_pg * q_e
        d_gamma_e = the[:ne] - phi[:ne] - one_pg * (pg[:ne] + q_e * the[:ne])
        d_lam_e = 1.0 / lam + weib.logF[:ne] * lin_e
        coefF = lam - 1.0 - lam * one_pg * q_e
        df1_e = (a2 / a1) * (1.0 - weib.z[:ne])
        df2_e = 1.0 / a2 + weib.lay[:ne] * (1.0 - weib.z[:ne])
        d_a1_e = df1_e + dF1[:ne] * coefF
        d_a2_e = df2_e + dF2[:ne] * coefF
        bf_e = (1.0 + gamma * the[:ne]) * lin_e
        ev = np.empty(5 + self.k)
        ev[0] = d_gamma_e.sum()
        ev[1] = d_lam_e.sum()
        ev[2] = d_a1_e.sum()
        ev[3] = d_a2_e.sum()
        ev[4] = bf_e.sum()
        ev[5:] = bf_e @ self.x[:ne]

        # Censored block: d log p0 and d log S_P per observation, then the
        # susceptible term d log(S_P - p0) = (dlogSP - rho*dlogp0)/(1 - rho).
        q_c = q[ne:n]
        qv_c = q[n:]
        the_c = the[ne:n]
        gth = 1.0 + gamma * the_c
        dSP_gamma = -(pg[ne:n] + q_c * the_c)
        dSP_lam = -q_c * weib.logF[ne:]
        dSP_a1 = -(q_c * lam) * dF1[ne:]
        dSP_a2 = -(q_c * lam) * dF2[ne:]
        bf_SP = -q_c * gth
        p0_gamma = -(pg[n:] + qv_c * the_c)
        p0_bf = -qv_c * gth

        rho = np.exp(d)
        r1m = -np.expm1(d)
        smp_gamma = (dSP_gamma - rho * p0_gamma) / r1m
        smp_lam = dSP_lam / r1m
        smp_a1 = dSP_a1 / r1m
        smp_a2 = dSP_a2 / r1m
        smp_bf = (bf_SP - rho * p0_bf) / r1m
        return GradParts(ev, p0_gamma, p0_bf, smp_gamma, smp_lam,
                         smp_a1, smp_a2, smp_bf)

    # -- reductions over the latent vector ----------------------------------

    def complete_loglik(self, pe: PointEval, ind_c: np.ndarray) -> float:
        """log L_c given censored-row indicators (1 = susceptible)."""
        if not pe.ok:
            return -np.inf
        if self.n_c == 0:
            return pe.sum_logfP
        cen = np.where(ind_c == 1, pe.logSmp_c, pe.logp0_c)
        return pe.sum_logfP + float(cen.sum())

    def observed_loglik(self, pe: PointEval) -> float:
        """Observed-data log likelihood (latent indicators integrated out)."""
        if not pe.ok:
            return -np.inf
        return pe.sum_logfP + float(pe.logSP_c.sum())

    def gibbs_weights(self, pe: PointEval, heat: float) -> np.ndarray:
        """P(I_i = 1 | ...) over censored rows for the heated target.

        w = (S_P - p0)**h / ((S_P - p0)**h + p0**h).  When both masses
        underflow to zero the subject is forced susceptible.
        """
        a = pe.logSmp_c
        b = pe.logp0_c
        if heat == 0.0:
            return np.full(self.n_c, 0.5)
        with np.errstate(**_ERRSTATE):
            w = expit(heat * (a - b))
        both_zero = np.isneginf(a) & np.isneginf(b)
        if both_zero.any():
            w[both_zero] = 1.0
        return w

    def weighted_grad(self, pe: PointEval, ind_c: np.ndarray) -> np.ndarray:
        """Gradient of log L_c in (gamma, lam, alpha1, alpha2, beta...)."""
        gp = pe.grad
        g = gp.ev.copy()
        if self.n_c == 0:
            return g
        sus = ind_c == 1
        g[0] += float(np.where(sus, gp.smp_gamma, gp.p0_gamma).sum())
        g[1] += float(np.sum(gp.smp_lam, where=sus))
        g[2] += float(np.sum(gp.smp_a1, where=sus))
        g[3] += float(np.sum(gp.smp_a2, where=sus))
        bf = np.where(sus, gp.smp_bf, gp.p0_bf)
        g[4] += float(bf.sum())
        if self.k:
            g[5:] += bf @ self.x_c
        return g

    def full_latent(self, ind_c: np.ndarray) -> np.ndarray:
        """Expand censored-row indicators to a full-length indicator vector."""
        ind = np.ones(self.data.n, dtype=np.int8)
        ind[self.censored_index] = ind_c
        return ind
