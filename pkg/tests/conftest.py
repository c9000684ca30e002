import numpy as np
import pytest

from bayescure import CureRateEvaluator, generate, preset_hyperparams
from bayescure.simulate import SCENARIOS


@pytest.fixture(scope="session")
def a1_small():
    """Small scenario-A1 dataset shared by gradient/sampler tests."""
    data, latent, meta = generate(SCENARIOS["A1"], 120, seed=2024, mc_n=20000)
    return data, latent, meta


@pytest.fixture(scope="session")
def a1_evaluator(a1_small):
    return CureRateEvaluator(a1_small[0])


@pytest.fixture(scope="session")
def hp_reg():
    return preset_hyperparams("regularized", 2)


@pytest.fixture(scope="session")
def hp_vague():
    return preset_hyperparams("vague", 2)


def feasible_point(rng, evaluator, heat=1.0):
    """Random parameter point with a finite complete log likelihood, plus a
    latent draw from its full conditional."""
    from bayescure.priors import sample_initial

    while True:
        params = sample_initial(rng, evaluator.k)
        pe = evaluator.evaluate(params)
        if not pe.ok:
            continue
        w = evaluator.gibbs_weights(pe, heat)
        ind_c = (rng.random(evaluator.n_c) < w).astype(np.int8)
        if np.isfinite(evaluator.complete_loglik(pe, ind_c)):
            return params, ind_c


def richardson_fd(fun, vec, j, step):
    """Central finite difference with one Richardson refinement."""
    def d(h):
        up = vec.copy(); up[j] += h
        dn = vec.copy(); dn[j] -= h
        return (fun(up) - fun(dn)) / (2.0 * h)

    d1 = d(step)
    d2 = d(step / 2.0)
    return (4.0 * d2 - d1) / 3.0


def fd_gradient(fun, vec, rel_step=1e-6):
    """Finite-difference gradient of a scalar function of a parameter vector.

    Returns None if any evaluation point is non-finite (caller resamples).
    """
    out = np.empty(vec.size)
    for j in range(vec.size):
        h = rel_step * max(1.0, abs(vec[j]))
        vals = []
        for s in (h, -h, h / 2.0, -h / 2.0):
            up = vec.copy(); up[j] += s
            v = fun(up)
            if not np.isfinite(v):
                return None
            vals.append(v)
        d1 = (vals[0] - vals[1]) / (2.0 * h)
        d2 = (vals[2] - vals[3]) / h
        out[j] = (4.0 * d2 - d1) / 3.0
    return out
