"""Post-processing of cold-chain output: MAP, HDIs, convergence, FDR calls.

A ``TraceStore`` holds thinned cold-chain draws plus the burn-in/thinning
metadata needed to interpret them; every summary here consumes the retained
(post burn-in) draws only.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import gaussian_kde

from .model import InfeasibleParamsError, ModelParams, cure_prob, pop_survival

__all__ = [
    "TraceStore",
    "FdrDecision",
    "CureCurve",
    "param_names",
    "map_estimate",
    "hdi",
    "psrf",
    "susceptible_prob",
    "fdr_control",
    "cure_curve",
]


def param_names(k: int) -> list:
    return ["gamma", "lambda", "alpha1", "alpha2"] + [f"beta{j}" for j in range(k + 1)]


@dataclass
class TraceStore:
    """Thinned cold-chain draws with burn-in and thinning metadata.

    One row per stored cycle: the parameter vector, the unheated log joint
    posterior, the observed-data log likelihood and the censored-row latent
    indicators.  ``burnin_cycles`` marks the cycle index up to which draws
    are discarded by ``retained``-style accessors.
    """

    theta: np.ndarray
    log_post: np.ndarray
    log_lik: np.ndarray
    ind_c: np.ndarray
    cycles: np.ndarray
    total_cycles: int
    thin: int
    burnin_cycles: int = 0
    censored_index: np.ndarray = field(default=None)
    n: int = 0

    @classmethod
    def from_mc3(cls, result, burnin_frac: float = 0.3) -> "TraceStore":
        burnin = int(burnin_frac * result.config.cycles)
        return cls(theta=result.theta, log_post=result.log_post,
                   log_lik=result.log_lik, ind_c=result.ind_c,
                   cycles=result.cycles, total_cycles=result.config.cycles,
                   thin=result.config.thin, burnin_cycles=burnin,
                   censored_index=result.censored_index, n=result.n)

    @property
    def k(self) -> int:
        return self.theta.shape[1] - 5

    @property
    def retained_mask(self) -> np.ndarray:
        return self.cycles > self.burnin_cycles

    def retained_theta(self) -> np.ndarray:
        return self.theta[self.retained_mask]

    def retained_log_post(self) -> np.ndarray:
        return self.log_post[self.retained_mask]

    def retained_ind(self) -> np.ndarray:
        return self.ind_c[self.retained_mask]


def map_estimate(trace: TraceStore) -> ModelParams:
    """Draw attaining the highest stored log joint posterior density."""
    lp = trace.retained_log_post()
    if lp.size == 0:
        raise ValueError("empty trace: nothing retained after burn-in")
    best = int(np.argmax(lp))
    return ModelParams.from_vector(trace.retained_theta()[best])


def hdi(samples, level: float = 0.95) -> list:
    """Highest-density region of a sample as a list of disjoint intervals.

    A Gaussian kernel density is evaluated on a 512-point grid and at the
    samples themselves; the density threshold is found by bisection as the
    largest value whose super-level set still holds at least ``level`` of the
    samples.  Samples above the threshold are grouped into intervals, split
    wherever the grid density dips below the threshold, so multimodal samples
    can yield several disjoint intervals.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise ValueError("empty sample")
    if s[0] == s[-1]:
        warnings.warn("degenerate sample: all values equal", RuntimeWarning)
        return [(float(s[0]), float(s[0]))]

    kde = gaussian_kde(s)
    bw = float(kde.factor) * float(s.std(ddof=1))
    grid = np.linspace(s[0] - 3.0 * bw, s[-1] + 3.0 * bw, 512)
    f_grid = kde(grid)
    # sample densities from the dense grid; evaluating the KDE at every
    # sample would be quadratic in the sample count
    f_samp = np.interp(s, grid, f_grid)

    lo_t, hi_t = 0.0, float(f_samp.max())
    for _ in range(60):
        mid = 0.5 * (lo_t + hi_t)
        if np.mean(f_samp >= mid) >= level:
            lo_t = mid
        else:
            hi_t = mid
    thr = lo_t

    sel = s[f_samp >= thr]
    above = f_grid >= thr
    intervals = []
    start = sel[0]
    prev = sel[0]
    for val in sel[1:]:
        if val > prev:
            i0 = int(np.searchsorted(grid, prev, side="left"))
            i1 = int(np.searchsorted(grid, val, side="right"))
            if not above[i0:i1].all():
                intervals.append((float(start), float(prev)))
                start = val
        prev = val
    intervals.append((float(start), float(prev)))
    return intervals


def psrf(chains, split: bool = False) -> float:
    """Potential scale reduction factor over two or more equal-length chains.

    The classic (non-split) variant: sqrt(((n-1)/n * W + B/n) / W).  With
    ``split=True`` each chain is halved first.
    """
    arr = np.asarray(chains, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ValueError("need a (chains, draws) array with at least 2 chains")
    if split:
        half = arr.shape[1] // 2
        arr = np.vstack([arr[:, :half], arr[:, half:2 * half]])
    n = arr.shape[1]
    if n < 10:
        raise ValueError("chains too short for a meaningful diagnostic")
    W = float(np.mean(np.var(arr, axis=1, ddof=1)))
    if W == 0.0:
        raise ValueError("zero within-chain variance")
    B = n * float(np.var(np.mean(arr, axis=1), ddof=1))
    return float(np.sqrt(((n - 1.0) / n * W + B / n) / W))


def susceptible_prob(trace: TraceStore) -> np.ndarray:
    """Posterior susceptibility probability per censored subject.

    The mean of the stored indicator draws over retained cycles, ordered as
    ``trace.censored_index``.
    """
    ind = trace.retained_ind()
    if ind.shape[0] == 0:
        raise ValueError("empty trace: nothing retained after burn-in")
    return ind.mean(axis=0)


@dataclass
class FdrDecision:
    """Outcome of the ordered-probability FDR rule at one tolerance."""

    alpha: float
    k_alpha: int
    decisions: np.ndarray
    expected_fdr: float

    @property
    def R(self) -> int:
        return self.k_alpha


def fdr_control(cure_probs, alpha: float) -> FdrDecision:
    """Classify subjects as cured while controlling the Bayesian FDR.

    Sort the cure probabilities q decreasingly, form the running means
    G_j = sum_{i<=j}(1 - q_i)/j, and declare the top k_alpha subjects cured,
    with k_alpha the largest j such that G_j <= alpha (0 when none).  The
    estimated FDR of the selection is G_{k_alpha} <= alpha by construction,
    with the 0/0 = 0 convention when nothing is declared.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    q = np.asarray(cure_probs, dtype=float)
    if np.any((q < 0) | (q > 1)):
        raise ValueError("cure probabilities must lie in [0, 1]")
    D = q.size
    order = np.argsort(-q, kind="stable")
    G = np.cumsum(1.0 - q[order]) / np.arange(1, D + 1)
    ok = np.flatnonzero(G <= alpha)
    k = int(ok[-1]) + 1 if ok.size else 0
    decisions = np.zeros(D, dtype=np.int8)
    decisions[order[:k]] = 1
    expected = float(G[k - 1]) if k else 0.0
    return FdrDecision(alpha=float(alpha), k_alpha=k, decisions=decisions,
                       expected_fdr=expected)


@dataclass
class CureCurve:
    """Posterior mean of P(cured | T >= t, x) with pointwise HDI bands."""

    t: np.ndarray
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    skipped: int


def cure_curve(params_draws, x_row, t_grid, level: float = 0.95) -> CureCurve:
    """Conditional cure probability curve p0(x) / S_P(t, x) over draws.

    Draws that are infeasible at any grid point are skipped and counted.
    The band is the pointwise HDI envelope of the per-draw curves.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    rows = []
    skipped = 0
    for draw in params_draws:
        params = draw if isinstance(draw, ModelParams) else ModelParams.from_vector(draw)
        try:
            p0 = cure_prob(x_row, params)
            sp = pop_survival(t_grid, x_row, params)
        except InfeasibleParamsError:
            skipped += 1
            continue
        rows.append(p0 / np.asarray(sp))
    if not rows:
        raise ValueError("no feasible draws for the requested covariate row")
    curves = np.vstack(rows)
    mean = curves.mean(axis=0)
    lo = np.empty(t_grid.size)
    hi = np.empty(t_grid.size)
    for j in range(t_grid.size):
        col = curves[:, j]
        if col.min() == col.max():
            lo[j] = hi[j] = col[0]
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            parts = hdi(col, level)
        lo[j] = parts[0][0]
        hi[j] = parts[-1][1]
    return CureCurve(t=t_grid, mean=mean, lo=lo, hi=hi, skipped=skipped)
