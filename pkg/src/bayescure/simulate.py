"""Synthetic dataset generation for the fourteen benchmark scenarios.

Each scenario fixes the model parameters, the support of the discrete
covariate X1 (X2 is always Uniform(0,1)), a target censoring proportion among
susceptibles, and the implied marginal cure rate (recorded for validation).
Generation draws covariates, then cure status Bernoulli(1 - p0(x)), assigns
cured subjects a censoring time, and susceptible subjects the minimum of an
exponential censoring time and an event time drawn from the susceptible
survival law by closed-form inversion.  The exponential censoring rate is
calibrated by Monte Carlo bisection so that P(C < T | susceptible) matches
the scenario's target.
"""

import json
from dataclasses import dataclass

import numpy as np

from .model import Dataset, LatentState, ModelParams, link_theta, phi_parts

__all__ = [
    "Scenario",
    "SCENARIOS",
    "invert_susceptible_time",
    "calibrate_censoring",
    "generate",
    "write_dataset_csv",
    "write_sidecar_json",
    "read_sidecar_json",
]


@dataclass(frozen=True)
class Scenario:
    name: str
    params: ModelParams
    x1_levels: int
    target_censoring: float
    nominal_cure_rate: float


def _sc(name, gamma, lam, a1, a2, b0, b1, b2, levels, cens, cure):
    return Scenario(name, ModelParams(gamma, lam, a1, a2, np.array([b0, b1, b2])),
                    levels, cens, cure)


SCENARIOS = {s.name: s for s in (
    _sc("A1", 1.0, 1.5, 0.8, 0.8, 1.5, 1.5, -0.8, 1, 0.10, 0.05),
    _sc("A2", 1.0, 1.5, 0.8, 0.8, 1.5, 1.5, -0.8, 1, 0.20, 0.05),
    _sc("B1", 1.0, 1.0, 0.5, 0.5, -0.8, 1.5, 1.5, 1, 0.10, 0.25),
    _sc("B2", 1.0, 1.0, 0.5, 0.5, -0.8, 1.5, 1.5, 1, 0.20, 0.25),
    _sc("C1", 1.0, 1.0, 1.0, 1.0, -4.0, 1.0, 1.0, 5, 0.10, 0.60),
    _sc("C2", 1.0, 1.0, 1.0, 1.0, -4.0, 1.0, 1.0, 5, 0.20, 0.60),
    _sc("D1", -0.05, 1.0, 0.8, 1.0, 2.0, -1.0, 1.0, 5, 0.10, 0.40),
    _sc("D2", -0.05, 1.0, 0.8, 1.0, 2.0, -1.0, 1.0, 5, 0.20, 0.40),
    _sc("E1", -0.5, 1.0, 0.8, 1.0, 2.0, -0.7, 1.0, 5, 0.10, 0.25),
    _sc("E2", -0.5, 1.0, 0.8, 1.0, 2.0, -0.7, 1.0, 5, 0.20, 0.25),
    _sc("F1", -1.0, 0.5, 0.5, 0.5, 1.0, 0.0, 0.0, 5, 0.10, 0.0),
    _sc("F2", -1.0, 0.5, 0.5, 0.5, 1.0, 0.0, 0.0, 5, 0.20, 0.0),
    _sc("F3", -1.0, 1.0, 0.5, 0.5, 1.0, 0.0, 0.0, 5, 0.30, 0.0),
    _sc("F4", -1.0, 1.0, 0.5, 0.5, 1.0, 0.0, 0.0, 5, 0.40, 0.0),
)}


def _theta_vec(params: ModelParams, x: np.ndarray) -> np.ndarray:
    return np.exp(params.beta[0] + x @ params.beta[1:])


def _p0_vec(th: np.ndarray, gamma: float) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lv = np.log(th) + gamma * th / np.e
        phi, ok = phi_parts(np.exp(lv), gamma)
    if not ok:
        raise ValueError("cure rate undefined for some covariate values")
    return np.exp(-phi)


def _invert_times(u: np.ndarray, th: np.ndarray, params: ModelParams) -> np.ndarray:
    """Solve S_U(t | x) = u in closed form for each subject."""
    gamma, lam, a1, a2 = params.gamma, params.lam, params.alpha1, params.alpha2
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lv = np.log(th) + gamma * th / np.e
        phi0, ok = phi_parts(np.exp(lv), gamma)
    if not ok:
        raise ValueError("susceptible law undefined for some covariate values")
    p0 = np.exp(-phi0)
    if np.any(p0 >= 1.0):
        raise ValueError("cure mass is numerically 1: no susceptible law to invert")
    s = p0 + (1.0 - p0) * u
    logs = np.log(s)
    # S_P = s  <=>  u_mass = expm1(-gamma*log s)/gamma, stable for tiny gamma*log s.
    w = np.expm1(-gamma * logs) / gamma
    with np.errstate(divide="ignore"):
        logF = (np.log(w) - lv) / lam
    if not np.all(logF < 0.0):
        raise ValueError("inversion left the (0, 1) range of the promotion-time CDF")
    z = -np.log1p(-np.exp(logF))
    return z ** (1.0 / a2) / a1


def invert_susceptible_time(u: float, x_row, params: ModelParams) -> float:
    """Susceptible event time with survival u, for one subject."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must lie strictly between 0 and 1")
    th = np.array([link_theta(params.beta, x_row)])
    return float(_invert_times(np.array([float(u)]), th, params)[0])


def _draw_covariates(rng: np.random.Generator, n: int, levels: int) -> np.ndarray:
    x1 = rng.integers(0, levels + 1, size=n).astype(float)
    x2 = rng.random(n)
    return np.column_stack([x1, x2])


def calibrate_censoring(scenario: Scenario, target: float = None,
                        mc_n: int = 100_000, seed: int = 0,
                        max_steps: int = 60) -> float:
    """Exponential censoring rate giving P(C < T | susceptible) = target.

    Draws ``mc_n`` covariate rows and susceptible event times, then bisects
    the rate r on the smooth Monte Carlo estimator
    E_w[1 - exp(-r T)] (weights w = 1 - p0 reweight covariates to the
    susceptible subpopulation).  Deterministic for a fixed seed.
    """
    if target is None:
        target = scenario.target_censoring
    if not 0.0 < target < 1.0:
        raise ValueError("target censoring proportion must lie in (0, 1)")
    root = np.random.SeedSequence([seed, 0xCA11B])
    rng = np.random.Generator(np.random.PCG64(root))
    x = _draw_covariates(rng, mc_n, scenario.x1_levels)
    th = _theta_vec(scenario.params, x)
    wgt = 1.0 - _p0_vec(th, scenario.params.gamma)
    wsum = float(wgt.sum())
    if wsum <= 0:
        raise ValueError("scenario has no susceptible mass to calibrate against")
    u = np.clip(rng.random(mc_n), 1e-16, 1.0 - 1e-16)
    t_ev = _invert_times(u, th, scenario.params)

    def prop(rate):
        return float((wgt * -np.expm1(-rate * t_ev)).sum()) / wsum

    lo, hi = 0.0, 1.0 / float(np.median(t_ev))
    grow = 0
    while prop(hi) < target:
        hi *= 4.0
        grow += 1
        if grow > 100:
            raise RuntimeError("censoring calibration failed to bracket the target")
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if prop(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate(scenario: Scenario, n: int, seed: int,
             mc_n: int = 100_000, rate: float = None):
    """Draw one synthetic dataset; returns (Dataset, true LatentState, meta).

    Covariates, cure status, censoring times and susceptible event times come
    from separate sub-streams of the seed, so the draw is reproducible and
    independent of evaluation order.  ``rate`` overrides the calibrated
    exponential censoring rate.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if rate is None:
        rate = calibrate_censoring(scenario, mc_n=mc_n, seed=seed)
    streams = np.random.SeedSequence(seed).spawn(4)
    rng_cov, rng_lat, rng_ev, rng_cen = (
        np.random.Generator(np.random.PCG64(s)) for s in streams)

    params = scenario.params
    x = _draw_covariates(rng_cov, n, scenario.x1_levels)
    th = _theta_vec(params, x)
    p0 = _p0_vec(th, params.gamma)
    sus = rng_lat.random(n) < 1.0 - p0
    cen = rng_cen.exponential(1.0 / rate, size=n)

    y = cen.copy()
    delta = np.zeros(n, dtype=np.int8)
    idx = np.flatnonzero(sus)
    if idx.size:
        u = np.clip(rng_ev.random(idx.size), 1e-16, 1.0 - 1e-16)
        t_ev = _invert_times(u, th[idx], params)
        y[idx] = np.minimum(t_ev, cen[idx])
        delta[idx] = (t_ev < cen[idx]).astype(np.int8)

    data = Dataset(y=y, delta=delta, x=x)
    latent = LatentState(sus.astype(np.int8))
    meta = {"scenario": scenario.name, "n": int(n), "seed": int(seed),
            "censoring_rate": float(rate),
            "target_censoring": scenario.target_censoring,
            "nominal_cure_rate": scenario.nominal_cure_rate}
    return data, latent, meta


# ---------------------------------------------------------------------------
# On-disk formats
# ---------------------------------------------------------------------------

def write_dataset_csv(path, data: Dataset, covariate_names=None):
    names = covariate_names or [f"x{j + 1}" for j in range(data.k)]
    if len(names) != data.k:
        raise ValueError("one covariate name per column required")
    with open(path, "w") as fh:
        fh.write(",".join(["y", "delta", *names]) + "\n")
        for i in range(data.n):
            cells = [repr(float(data.y[i])), str(int(data.delta[i]))]
            cells += [repr(float(v)) for v in data.x[i]]
            fh.write(",".join(cells) + "\n")


def write_sidecar_json(path, meta: dict, latent: LatentState):
    doc = dict(meta)
    # evaluation-only ground truth, not an input to any fitting path
    doc["true_latent"] = [int(v) for v in latent.ind]
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_sidecar_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
