"""MALA-within-Gibbs chain kernel and the Metropolis-coupled ensemble wrapper.

One chain targets the heated joint posterior pi(theta, I | data)**h.  Each
iteration either sweeps single-site Metropolis-Hastings updates over the five
parameter blocks (probability ``p_single_site``) or makes one joint MALA move,
then redraws the latent susceptibility indicators from their full
conditional.  The ensemble runs C chains on a decreasing temperature ladder,
advances every chain ``iters_per_cycle`` iterations per cycle, then attempts
one state swap between a uniformly chosen adjacent pair; only the cold chain
is recorded.

Determinism: chain c draws exclusively from a private generator derived from
(seed, c); swap decisions use a separate coordinator stream.  Results are
therefore byte-identical for any worker count.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .likelihood import CureRateEvaluator
from .model import Dataset, GAMMA_SUPPORT_EPS, LatentState, ModelParams
from .priors import PriorHyperparams, grad_log_prior_unnorm, log_prior_unnorm, sample_initial

__all__ = [
    "ProposalScales",
    "ChainState",
    "ChainTrace",
    "Mc3Config",
    "Mc3Result",
    "temperature_ladder",
    "chain_generator",
    "swap_generator",
    "default_scales",
    "init_chain_state",
    "mh_single_site_sweep",
    "mala_step",
    "gibbs_latent",
    "run_chain",
    "swap_log_prob",
    "adapt_scales",
    "run_mc3",
]

MH_BAND = (0.15, 0.30)
MALA_BAND = (0.40, 0.60)
_BLOCKS = ("gamma", "lam", "alpha1", "alpha2", "beta", "mala")


@dataclass
class ProposalScales:
    """Proposal variances per Metropolis block plus the MALA step size tau."""

    s2_gamma: float
    s2_lam: float
    s2_alpha1: float
    s2_alpha2: float
    nu: np.ndarray
    tau: float

    def copy(self) -> "ProposalScales":
        return ProposalScales(self.s2_gamma, self.s2_lam, self.s2_alpha1,
                              self.s2_alpha2, self.nu.copy(), self.tau)

    def validate(self):
        vals = [self.s2_gamma, self.s2_lam, self.s2_alpha1, self.s2_alpha2,
                self.tau, *np.atleast_1d(self.nu)]
        if any(v < 0 for v in vals):
            raise ValueError("proposal scales must be nonnegative")
        return self


def default_scales(k: int) -> ProposalScales:
    return ProposalScales(0.04, 0.04, 0.04, 0.04, np.full(k + 1, 0.04), 1e-3)


class ChainState:
    """Mutable state of one chain: parameter point, latent indicators, heat,
    proposal scales and the chain's private random generator.

    Likelihood caches are held lazily and dropped on pickling; recomputation
    is bitwise identical, so shipping states to worker processes does not
    perturb the trajectory.
    """

    def __init__(self, params: ModelParams, ind_c: np.ndarray, heat: float,
                 scales: ProposalScales, rng: np.random.Generator):
        if not 0.0 <= heat <= 1.0:
            raise ValueError("heat must lie in [0, 1]")
        self.params = params
        self.ind_c = np.asarray(ind_c, dtype=np.int8)
        self.heat = float(heat)
        self.scales = scales
        self.rng = rng
        self._pe = None
        self._cll = None
        self._lpu = None
        self.reset_counters()

    def reset_counters(self):
        self.proposals = dict.fromkeys(_BLOCKS, 0)
        self.accepts = dict.fromkeys(_BLOCKS, 0)

    def acceptance_rates(self) -> dict:
        return {b: (self.accepts[b] / self.proposals[b] if self.proposals[b] else np.nan)
                for b in _BLOCKS}

    def latent(self, evaluator: CureRateEvaluator) -> LatentState:
        return LatentState(evaluator.full_latent(self.ind_c))

    def log_joint(self) -> float:
        """Unheated, unnormalized log joint posterior at the cached point."""
        return self._cll + self._lpu

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_pe"] = None
        state["_cll"] = None
        state["_lpu"] = None
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)


@dataclass
class ChainTrace:
    """Per-iteration record of one chain run."""

    theta: np.ndarray
    log_post: np.ndarray
    log_lik: np.ndarray
    ind_c: np.ndarray


def temperature_ladder(chains: int, epsilon: float = 0.001, decay: float = 2.5) -> np.ndarray:
    """Heats h_c = (1 + epsilon)**-(c**decay - 1), c = 1..chains.

    Strictly decreasing with h_1 = 1 exactly.
    """
    if chains < 1:
        raise ValueError("need at least one chain")
    c = np.arange(1, chains + 1, dtype=float)
    return np.exp(-(c ** decay - 1.0) * np.log1p(epsilon))


def chain_generator(seed: int, chain_index: int) -> np.random.Generator:
    """The private generator of chain ``chain_index`` under a run seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed).spawn(chain_index + 1)[chain_index]))


def swap_generator(seed: int, chains: int) -> np.random.Generator:
    """Coordinator stream driving swap-pair selection and swap acceptances."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed).spawn(chains + 1)[chains]))


def init_chain_state(data, hp: PriorHyperparams, heat: float,
                     scales: ProposalScales, rng: np.random.Generator,
                     max_attempts: int = 100,
                     evaluator: CureRateEvaluator = None) -> ChainState:
    """Draw random starting values until the joint posterior is finite."""
    ev = evaluator if evaluator is not None else CureRateEvaluator(data)
    for _ in range(max_attempts):
        params = sample_initial(rng, ev.k)
        pe = ev.evaluate(params)
        if not pe.ok:
            continue
        w = ev.gibbs_weights(pe, heat)
        ind_c = (rng.random(ev.n_c) < w).astype(np.int8)
        cll = ev.complete_loglik(pe, ind_c)
        lpu = log_prior_unnorm(params, hp)
        if np.isfinite(cll + lpu):
            state = ChainState(params, ind_c, heat, scales.copy(), rng)
            state._pe, state._cll, state._lpu = pe, cll, lpu
            return state
    raise RuntimeError(f"no finite starting point found in {max_attempts} attempts")


def _refresh(state: ChainState, ev: CureRateEvaluator, hp: PriorHyperparams):
    """Recompute caches after unpickling or direct state construction."""
    if state._pe is None:
        state._pe = ev.evaluate(state.params)
        state._cll = ev.complete_loglik(state._pe, state.ind_c)
    if state._lpu is None:
        state._lpu = log_prior_unnorm(state.params, hp)


def _accept(rng_u: float, log_ratio: float) -> bool:
    if log_ratio >= 0.0:
        return True
    # log(u) is finite almost surely; NaN ratios (both sides -inf) reject.
    return math.log(rng_u) < log_ratio


def _mh_update(state, ev, hp, block, new_params, hastings, weib, link):
    pe_new = ev.evaluate(new_params, weib=weib, link=link)
    cll_new = ev.complete_loglik(pe_new, state.ind_c)
    lpu_new = log_prior_unnorm(new_params, hp)
    t_new = cll_new + lpu_new
    u = state.rng.random()
    state.proposals[block] += 1
    if not pe_new.ok or t_new == -np.inf:
        return
    t_cur = state._cll + state._lpu
    if t_cur == -np.inf:
        log_ratio = np.inf
    else:
        log_ratio = state.heat * (t_new - t_cur) + hastings
    if _accept(u, log_ratio):
        state.accepts[block] += 1
        state.params = new_params
        state._pe = pe_new
        state._cll = cll_new
        state._lpu = lpu_new


def mh_single_site_sweep(state: ChainState, data, hp: PriorHyperparams,
                         evaluator: CureRateEvaluator = None) -> ChainState:
    """One sweep of single-site Metropolis-Hastings updates over all blocks.

    gamma uses a symmetric normal proposal; lam, alpha1 and alpha2 use
    log-normal proposals (Hastings correction new/old); beta is updated
    jointly with independent normal proposals.  Each block is accepted with
    the heated complete-posterior ratio.
    """
    ev = evaluator if evaluator is not None else CureRateEvaluator(data)
    _refresh(state, ev, hp)
    rng = state.rng
    sc = state.scales
    p = state.params

    gamma_new = p.gamma + math.sqrt(sc.s2_gamma) * rng.normal()
    _mh_update(state, ev, hp, "gamma",
               ModelParams(gamma_new, p.lam, p.alpha1, p.alpha2, p.beta), 0.0,
               state._pe.weib, state._pe.link)

    p = state.params
    lam_new = p.lam * math.exp(math.sqrt(sc.s2_lam) * rng.normal())
    _mh_update(state, ev, hp, "lam",
               ModelParams(p.gamma, lam_new, p.alpha1, p.alpha2, p.beta),
               math.log(lam_new) - math.log(p.lam), state._pe.weib, state._pe.link)

    p = state.params
    a1_new = p.alpha1 * math.exp(math.sqrt(sc.s2_alpha1) * rng.normal())
    _mh_update(state, ev, hp, "alpha1",
               ModelParams(p.gamma, p.lam, a1_new, p.alpha2, p.beta),
               math.log(a1_new) - math.log(p.alpha1), None, state._pe.link)

    p = state.params
    a2_new = p.alpha2 * math.exp(math.sqrt(sc.s2_alpha2) * rng.normal())
    _mh_update(state, ev, hp, "alpha2",
               ModelParams(p.gamma, p.lam, p.alpha1, a2_new, p.beta),
               math.log(a2_new) - math.log(p.alpha2), None, state._pe.link)

    p = state.params
    beta_new = p.beta + np.sqrt(sc.nu) * rng.normal(size=p.beta.size)
    _mh_update(state, ev, hp, "beta",
               ModelParams(p.gamma, p.lam, p.alpha1, p.alpha2, beta_new), 0.0,
               state._pe.weib, None)
    return state


def _heated_grad(state, ev, hp):
    """h * (grad log L_c + grad log prior) at the cached point, or None."""
    pe = state._pe
    if pe.grad is None:
        pe = ev.evaluate(state.params, need_grad=True, weib=pe.weib, link=pe.link)
        if not pe.ok:
            return None
        state._pe = pe
    g = ev.weighted_grad(pe, state.ind_c) + grad_log_prior_unnorm(state.params, hp)
    if not np.all(np.isfinite(g)):
        return None
    return state.heat * g


def _support_ok(params: ModelParams) -> bool:
    return (params.lam > 0 and params.alpha1 > 0 and params.alpha2 > 0
            and abs(params.gamma) >= GAMMA_SUPPORT_EPS)


def mala_step(state: ChainState, data, hp: PriorHyperparams,
              evaluator: CureRateEvaluator = None) -> ChainState:
    """One joint Langevin proposal over all parameters.

    Proposal: theta + tau * grad(h-log-posterior) + sqrt(2 tau) * N(0, I).
    Accepted with the Metropolis-Hastings ratio including the asymmetric
    normal transition densities.  Proposals outside the parameter space are
    rejected outright; a gradient failure at the current point falls back to
    a single-site sweep for this iteration.
    """
    ev = evaluator if evaluator is not None else CureRateEvaluator(data)
    _refresh(state, ev, hp)
    g_cur = _heated_grad(state, ev, hp)
    if g_cur is None or state._cll + state._lpu == -np.inf:
        return mh_single_site_sweep(state, data, hp, evaluator=ev)

    rng = state.rng
    tau = state.scales.tau
    theta = state.params.as_vector()
    eps = rng.normal(size=theta.size)
    theta_new = theta + tau * g_cur + math.sqrt(2.0 * tau) * eps
    u = rng.random()
    state.proposals["mala"] += 1

    new_params = ModelParams.from_vector(theta_new)
    if not _support_ok(new_params):
        return state
    pe_new = ev.evaluate(new_params, need_grad=True)
    if not pe_new.ok:
        return state
    cll_new = ev.complete_loglik(pe_new, state.ind_c)
    lpu_new = log_prior_unnorm(new_params, hp)
    t_new = cll_new + lpu_new
    if t_new == -np.inf:
        return state
    g_new = ev.weighted_grad(pe_new, state.ind_c) + grad_log_prior_unnorm(new_params, hp)
    if not np.all(np.isfinite(g_new)):
        return state
    g_new = state.heat * g_new

    fwd = theta_new - theta - tau * g_cur
    rev = theta - theta_new - tau * g_new
    if tau > 0.0:
        log_q = (fwd @ fwd - rev @ rev) / (4.0 * tau)
    else:
        log_q = 0.0
    log_ratio = state.heat * (t_new - (state._cll + state._lpu)) + log_q
    if _accept(u, log_ratio):
        state.accepts["mala"] += 1
        state.params = new_params
        state._pe = pe_new
        state._cll = cll_new
        state._lpu = lpu_new
    return state


def gibbs_latent(state: ChainState, data, evaluator: CureRateEvaluator = None,
                 hp: PriorHyperparams = None) -> ChainState:
    """Redraw every censored subject's indicator from its full conditional."""
    ev = evaluator if evaluator is not None else CureRateEvaluator(data)
    if state._pe is None:
        state._pe = ev.evaluate(state.params)
    w = ev.gibbs_weights(state._pe, state.heat)
    state.ind_c = (state.rng.random(ev.n_c) < w).astype(np.int8)
    state._cll = ev.complete_loglik(state._pe, state.ind_c)
    return state


def _iterate(state: ChainState, ev: CureRateEvaluator, hp: PriorHyperparams,
             p_single_site: float):
    if state.rng.random() < p_single_site:
        mh_single_site_sweep(state, None, hp, evaluator=ev)
    else:
        mala_step(state, None, hp, evaluator=ev)
    gibbs_latent(state, None, evaluator=ev)


def run_chain(state: ChainState, data, hp: PriorHyperparams, m: int,
              p_single_site: float = 0.5,
              evaluator: CureRateEvaluator = None,
              record: bool = True):
    """Advance one chain m iterations, optionally recording every iteration.

    Each iteration runs the single-site sweep with probability
    ``p_single_site`` and the MALA move otherwise, then the latent Gibbs
    update.  Returns (state, ChainTrace or None); the trace rows hold the
    parameter vector, the unheated log joint posterior, the observed-data
    log likelihood and the censored-row indicators.
    """
    ev = evaluator if evaluator is not None else CureRateEvaluator(data)
    _refresh(state, ev, hp)
    if record:
        dim = state.params.dim
        theta = np.empty((m, dim))
        log_post = np.empty(m)
        log_lik = np.empty(m)
        ind = np.empty((m, ev.n_c), dtype=np.int8)
    for t in range(m):
        _iterate(state, ev, hp, p_single_site)
        if record:
            theta[t] = state.params.as_vector()
            log_post[t] = state._cll + state._lpu
            log_lik[t] = ev.observed_loglik(state._pe)
            ind[t] = state.ind_c
    trace = ChainTrace(theta, log_post, log_lik, ind) if record else None
    return state, trace


def swap_log_prob(state_i: ChainState, state_j: ChainState, data,
                  hp: PriorHyperparams, evaluator: CureRateEvaluator = None) -> float:
    """Log acceptance probability of swapping two chains' states.

    Simplifies to (h_i - h_j) * (log pi(xi_j) - log pi(xi_i)) with log pi the
    unheated, unnormalized log joint posterior; capped at 0.
    """
    ev = evaluator if evaluator is not None else CureRateEvaluator(data)
    _refresh(state_i, ev, hp)
    _refresh(state_j, ev, hp)
    la = (state_i.heat - state_j.heat) * (state_j.log_joint() - state_i.log_joint())
    if np.isnan(la):
        la = 0.0 if state_i.heat == state_j.heat else -np.inf
    return min(0.0, float(la))


def adapt_scales(state: ChainState, data, hp: PriorHyperparams,
                 m0: int = 10000, batch: int = 200, factor: float = 2.0,
                 tau_factor: float = 1.5, p_single_site: float = 0.5,
                 mh_band=MH_BAND, mala_band=MALA_BAND, settle_frac: float = 0.25,
                 evaluator: CureRateEvaluator = None) -> ProposalScales:
    """Warm-up tuning: adjust proposal scales until acceptance rates land in
    their bands, then freeze.

    The first ``settle_frac`` of the budget runs the kernel without touching
    the scales, so the initial climb from a random start does not tune them
    to transient geometry.  Then the kernel runs in batches; after each batch
    every block whose measured acceptance rate falls outside its band has its
    scale multiplied or divided by ``factor``.  Stops early after a run of
    consecutive all-in-band batches (the chain keeps moving during warm-up,
    so isolated lucky batches are not trusted); warns (does not fail) if the
    bands are still unmet at the round cap.  The chain state keeps evolving
    and stays usable afterwards.
    """
    ev = evaluator if evaluator is not None else CureRateEvaluator(data)
    _refresh(state, ev, hp)
    settle = int(settle_frac * m0) if m0 >= 4 * batch else 0
    for _ in range(settle):
        _iterate(state, ev, hp, p_single_site)
    rounds = max(1, (m0 - settle) // batch)
    need_streak = max(3, min(10, rounds // 3))
    bands = {b: mh_band for b in ("gamma", "lam", "alpha1", "alpha2", "beta")}
    bands["mala"] = mala_band
    in_band = False
    streak = 0
    for _ in range(rounds):
        state.reset_counters()
        for _ in range(batch):
            _iterate(state, ev, hp, p_single_site)
        in_band = True
        sc = state.scales
        for block, (lo, hi) in bands.items():
            n = state.proposals[block]
            if n == 0:
                continue
            rate = state.accepts[block] / n
            # the MALA band is narrow, so tau moves by a gentler factor
            f = tau_factor if block == "mala" else factor
            if rate > hi:
                bump = f
            elif rate < lo:
                bump = 1.0 / f
            else:
                continue
            in_band = False
            if block == "gamma":
                sc.s2_gamma *= bump
            elif block == "lam":
                sc.s2_lam *= bump
            elif block == "alpha1":
                sc.s2_alpha1 *= bump
            elif block == "alpha2":
                sc.s2_alpha2 *= bump
            elif block == "beta":
                sc.nu *= bump
            else:
                sc.tau *= bump
        streak = streak + 1 if in_band else 0
        if streak >= need_streak:
            break
    if not in_band:
        warnings.warn("proposal-scale bands not reached within the warm-up cap",
                      RuntimeWarning)
    state.reset_counters()
    return state.scales


# ---------------------------------------------------------------------------
# Metropolis-coupled ensemble
# ---------------------------------------------------------------------------

@dataclass
class Mc3Config:
    """Ensemble settings; defaults follow the reference configuration."""

    chains: int = 16
    cycles: int = 20000
    iters_per_cycle: int = 10
    warmup_iters: int = 10000
    p_single_site: float = 0.5
    ladder_epsilon: float = 0.001
    ladder_decay: float = 2.5
    seed: int = 0
    workers: int = 1
    thin: int = 1
    init_attempts: int = 100

    def validate(self):
        if self.chains < 1 or self.cycles < 1 or self.iters_per_cycle < 1:
            raise ValueError("chains, cycles and iters_per_cycle must be positive")
        if not 0.0 <= self.p_single_site <= 1.0:
            raise ValueError("p_single_site must lie in [0, 1]")
        if self.ladder_epsilon <= 0 or self.ladder_decay <= 0:
            raise ValueError("ladder parameters must be positive")
        if self.thin < 1 or self.workers < 1 or self.warmup_iters < 0:
            raise ValueError("thin and workers must be >= 1, warmup_iters >= 0")
        return self


@dataclass
class Mc3Result:
    """Cold-chain draws (one row per stored cycle) plus run diagnostics."""

    cycles: np.ndarray
    theta: np.ndarray
    log_post: np.ndarray
    log_lik: np.ndarray
    ind_c: np.ndarray
    censored_index: np.ndarray
    n: int
    heats: np.ndarray
    scales: list
    acceptance: list
    swap_attempts: np.ndarray
    swap_accepts: np.ndarray
    config: Mc3Config


_POOL_EV = None
_POOL_HP = None
_POOL_P1 = None


def _pool_init(data, hp, p1):
    global _POOL_EV, _POOL_HP, _POOL_P1
    _POOL_EV = CureRateEvaluator(data)
    _POOL_HP = hp
    _POOL_P1 = p1


def _pool_warmup(args):
    state, m0 = args
    adapt_scales(state, None, _POOL_HP, m0=m0, p_single_site=_POOL_P1,
                 evaluator=_POOL_EV)
    return state


def _pool_advance(args):
    state, m = args
    _refresh(state, _POOL_EV, _POOL_HP)
    for _ in range(m):
        _iterate(state, _POOL_EV, _POOL_HP, _POOL_P1)
    return state


def run_mc3(data: Dataset, hp: PriorHyperparams, config: Mc3Config) -> Mc3Result:
    """Run the Metropolis-coupled ensemble and return the cold-chain trace.

    Per cycle every chain advances ``iters_per_cycle`` kernel iterations at
    its own heat, one swap is attempted between a uniformly chosen adjacent
    pair of chains (heats and scales stay attached to their slots, states
    move), and the cold chain's state is stored on the thinning grid.
    """
    config.validate()
    ev = CureRateEvaluator(data)
    C = config.chains
    heats = temperature_ladder(C, config.ladder_epsilon, config.ladder_decay)
    seedseq = np.random.SeedSequence(config.seed).spawn(C + 1)
    states = []
    for c in range(C):
        rng = np.random.Generator(np.random.PCG64(seedseq[c]))
        states.append(init_chain_state(data, hp, float(heats[c]),
                                       default_scales(ev.k), rng,
                                       max_attempts=config.init_attempts,
                                       evaluator=ev))
    rng_swap = np.random.Generator(np.random.PCG64(seedseq[C]))

    pool = None
    try:
        if config.workers > 1:
            import multiprocessing as mp
            pool = mp.get_context("fork").Pool(
                config.workers, initializer=_pool_init,
                initargs=(data, hp, config.p_single_site))

        if config.warmup_iters > 0:
            if pool is not None:
                states = pool.map(_pool_warmup,
                                  [(s, config.warmup_iters) for s in states], chunksize=1)
            else:
                for s in states:
                    adapt_scales(s, None, hp, m0=config.warmup_iters,
                                 p_single_site=config.p_single_site, evaluator=ev)

        n_store = config.cycles // config.thin
        dim = 5 + ev.k
        out_cycles = np.empty(n_store, dtype=np.int64)
        out_theta = np.empty((n_store, dim))
        out_lp = np.empty(n_store)
        out_ll = np.empty(n_store)
        out_ind = np.empty((n_store, ev.n_c), dtype=np.int8)
        swap_attempts = np.zeros(max(C - 1, 1), dtype=np.int64)
        swap_accepts = np.zeros(max(C - 1, 1), dtype=np.int64)

        stored = 0
        for t in range(1, config.cycles + 1):
            if pool is not None:
                states = pool.map(_pool_advance,
                                  [(s, config.iters_per_cycle) for s in states], chunksize=1)
                for s in states:
                    _refresh(s, ev, hp)
            else:
                for s in states:
                    for _ in range(config.iters_per_cycle):
                        _iterate(s, ev, hp, config.p_single_site)
            if C > 1:
                c = int(rng_swap.integers(0, C - 1))
                u = float(rng_swap.random())
                la = swap_log_prob(states[c], states[c + 1], data, hp, evaluator=ev)
                swap_attempts[c] += 1
                if math.log(u) < la:
                    swap_accepts[c] += 1
                    _swap_states(states[c], states[c + 1])
            if t % config.thin == 0:
                cold = states[0]
                _refresh(cold, ev, hp)
                out_cycles[stored] = t
                out_theta[stored] = cold.params.as_vector()
                out_lp[stored] = cold.log_joint()
                out_ll[stored] = ev.observed_loglik(cold._pe)
                out_ind[stored] = cold.ind_c
                stored += 1
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    return Mc3Result(
        cycles=out_cycles[:stored], theta=out_theta[:stored],
        log_post=out_lp[:stored], log_lik=out_ll[:stored],
        ind_c=out_ind[:stored],
        censored_index=ev.censored_index, n=data.n, heats=heats,
        scales=[s.scales for s in states],
        acceptance=[s.acceptance_rates() for s in states],
        swap_attempts=swap_attempts, swap_accepts=swap_accepts,
        config=config,
    )


def _swap_states(a: ChainState, b: ChainState):
    """Exchange (theta, I) and their caches; heat, scales and rng stay put."""
    a.params, b.params = b.params, a.params
    a.ind_c, b.ind_c = b.ind_c, a.ind_c
    a._pe, b._pe = b._pe, a._pe
    a._cll, b._cll = b._cll, a._cll
    a._lpu, b._lpu = b._lpu, a._lpu
