import numpy as np
import pytest

from bayescure import (CureRateEvaluator, Dataset, InfeasibleParamsError,
                       ModelParams, complete_loglik, grad_complete_loglik,
                       grad_log_posterior)
from bayescure.gradients import log_joint_posterior
from bayescure.simulate import SCENARIOS, generate

from conftest import fd_gradient, feasible_point


def test_matches_finite_differences_likelihood(a1_small, a1_evaluator):
    data, _, _ = a1_small
    ev = a1_evaluator
    rng = np.random.default_rng(10)
    checked = 0
    while checked < 30:
        params, ind_c = feasible_point(rng, ev)
        lat = ev.full_latent(ind_c)
        try:
            g = grad_complete_loglik(params, data, lat, evaluator=ev)
        except InfeasibleParamsError:
            continue
        fd = fd_gradient(lambda v: complete_loglik(ModelParams.from_vector(v),
                                                   data, lat, evaluator=ev),
                         params.as_vector())
        if fd is None:
            continue
        assert np.all(np.abs(g - fd) <= 1e-5 * np.maximum(1.0, np.abs(fd)))
        checked += 1


def test_matches_finite_differences_posterior(a1_small, a1_evaluator, hp_reg):
    data, _, _ = a1_small
    ev = a1_evaluator
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 20:
        params, ind_c = feasible_point(rng, ev)
        lat = ev.full_latent(ind_c)
        try:
            g = grad_log_posterior(params, data, lat, hp_reg, evaluator=ev)
        except InfeasibleParamsError:
            continue
        fd = fd_gradient(lambda v: log_joint_posterior(ModelParams.from_vector(v),
                                                       data, lat, hp_reg, evaluator=ev),
                         params.as_vector())
        if fd is None:
            continue
        assert np.all(np.abs(g - fd) <= 1e-5 * np.maximum(1.0, np.abs(fd)))
        checked += 1


def test_heat_scales_likelihood_gradient(a1_small, a1_evaluator):
    data, _, _ = a1_small
    rng = np.random.default_rng(12)
    params, ind_c = feasible_point(rng, a1_evaluator)
    lat = a1_evaluator.full_latent(ind_c)
    g_full = grad_complete_loglik(params, data, lat, heat=1.0, evaluator=a1_evaluator)
    g_half = grad_complete_loglik(params, data, lat, heat=0.5, evaluator=a1_evaluator)
    assert np.allclose(g_half, 0.5 * g_full, rtol=1e-14)


def test_zero_covariate_column_kills_its_coordinate():
    rng = np.random.default_rng(13)
    n = 60
    x = np.column_stack([np.zeros(n), rng.random(n)])
    y = rng.exponential(1.0, n) + 0.05
    delta = (rng.random(n) < 0.7).astype(int)
    data = Dataset(y=y, delta=delta, x=x)
    ev = CureRateEvaluator(data)
    params = ModelParams(0.8, 1.2, 1.0, 1.1, np.array([0.2, 0.9, -0.3]))
    lat = ev.full_latent(np.ones(ev.n_c, dtype=np.int8))
    g = grad_complete_loglik(params, data, lat, evaluator=ev)
    # beta1 multiplies a column of zeros: every per-subject contribution is 0
    assert g[5] == 0.0


def test_infeasible_point_raises(a1_small):
    data, _, _ = a1_small
    params = ModelParams(-1.0, 1.0, 1.0, 1.0, np.array([800.0, 0.0, 0.0]))
    lat = np.ones(data.n, dtype=np.int8)
    with pytest.raises(InfeasibleParamsError):
        grad_complete_loglik(params, data, lat)


def test_no_nans_at_interior_points(a1_small, a1_evaluator, hp_reg):
    data, _, _ = a1_small
    rng = np.random.default_rng(14)
    for _ in range(2000):
        params, ind_c = feasible_point(rng, a1_evaluator)
        lat = a1_evaluator.full_latent(ind_c)
        if not np.isfinite(complete_loglik(params, data, lat, evaluator=a1_evaluator)):
            continue
        g = grad_log_posterior(params, data, lat, hp_reg, evaluator=a1_evaluator)
        assert np.all(np.isfinite(g))


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_scenario_parameter_sets_match_fd(name, hp_reg):
    """Gradient oracle at each benchmark parameter set (small point count;
    the acceptance suite runs the full 100-point version)."""
    data, _, _ = generate(SCENARIOS[name], 80, seed=100, mc_n=5000)
    ev = CureRateEvaluator(data)
    rng = np.random.default_rng(15)
    checked = 0
    while checked < 5:
        params, ind_c = feasible_point(rng, ev)
        lat = ev.full_latent(ind_c)
        try:
            g = grad_log_posterior(params, data, lat, hp_reg, heat=0.36, evaluator=ev)
        except InfeasibleParamsError:
            continue
        fd = fd_gradient(lambda v: log_joint_posterior(ModelParams.from_vector(v),
                                                       data, lat, hp_reg, evaluator=ev),
                         params.as_vector())
        if fd is None:
            continue
        fd = 0.36 * fd
        assert np.all(np.abs(g - fd) <= 1e-5 * np.maximum(1.0, np.abs(fd)))
        checked += 1
