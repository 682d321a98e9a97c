"""Generative-model draws and synthetic datasets."""

import numpy as np
import pytest
from scipy import stats

from demrecon import (ModelGrid, PARAM_CLASSES, beta_from_elicitation,
                      draw_joint, draw_theta, draw_variances,
                      positivity_indicator, prior_sample, project_full,
                      simulate_dataset, variance_draws)
from conftest import make_theta, flat_elicitation
from oracles import invgamma_cdf_oracle


def test_variance_draws_follow_prior(desk_hyper):
    rng = np.random.default_rng(0)
    draws = variance_draws(desk_hyper, "fertility", rng, 4000)
    assert np.all(draws > 0)
    a, b = desk_hyper.alpha["fertility"], desk_hyper.beta["fertility"]
    cdf = lambda x: np.array([invgamma_cdf_oracle(v, a, b)
                              for v in np.atleast_1d(x)])
    assert stats.kstest(draws, cdf).pvalue > 0.01


def test_draw_variances_covers_all_classes(desk_hyper):
    v = draw_variances(desk_hyper, np.random.default_rng(1))
    for cls in PARAM_CLASSES:
        assert getattr(v, cls) > 0


def test_draw_theta_centered_on_initial(desk_grid, desk_hyper):
    """With tiny variances the draw hugs the initial estimates."""
    initial = make_theta(desk_grid, seed=1)
    from demrecon import VarianceParams
    v = VarianceParams(**{c: 1e-10 for c in PARAM_CLASSES})
    theta = draw_theta(initial, v, desk_grid, np.random.default_rng(2))
    assert np.allclose(theta.baseline, initial.baseline, rtol=1e-3)
    assert np.allclose(theta.srb, initial.srb, rtol=1e-3)
    assert np.allclose(theta.survival, initial.survival, atol=1e-3)


def test_draw_theta_gives_up_when_positivity_unreachable(desk_grid, desk_hyper):
    initial = make_theta(desk_grid, seed=1)
    mig = np.full_like(initial.migration, -3.0)
    hopeless = initial.replace(migration=mig)
    from demrecon import VarianceParams
    v = VarianceParams(**{c: 1e-12 for c in PARAM_CLASSES})
    with pytest.raises(RuntimeError):
        draw_theta(hopeless, v, desk_grid, np.random.default_rng(3),
                   max_tries=50)


def test_draw_joint_returns_positive_trajectory(desk_grid, desk_hyper):
    initial = make_theta(desk_grid, seed=1)
    rng = np.random.default_rng(4)
    for _ in range(20):
        v, theta = draw_joint(initial, desk_hyper, desk_grid, rng)
        traj = project_full(theta.baseline, theta, desk_grid)
        assert positivity_indicator(traj) == 1
        for cls in PARAM_CLASSES:
            assert getattr(v, cls) > 0


def test_simulate_dataset_reproducible(desk_grid, desk_hyper):
    initial = make_theta(desk_grid, seed=1)
    d1 = simulate_dataset(desk_grid, initial, desk_hyper, seed=9)
    d2 = simulate_dataset(desk_grid, initial, desk_hyper, seed=9)
    assert np.array_equal(d1.census.counts, d2.census.counts)
    assert np.array_equal(d1.theta_true.srb, d2.theta_true.srb)
    d3 = simulate_dataset(desk_grid, initial, desk_hyper, seed=10)
    assert not np.array_equal(d1.census.counts, d3.census.counts)


def test_simulate_dataset_contents(desk_grid, desk_hyper):
    initial = make_theta(desk_grid, seed=1)
    data = simulate_dataset(desk_grid, initial, desk_hyper, seed=5)
    assert data.census.years == desk_grid.likelihood_years
    assert data.census.counts.shape == (len(data.census.years),
                                        desk_grid.n_ages, 2)
    assert np.all(data.census.counts > 0)
    # the noisy census scatters around the true trajectory
    traj = project_full(data.theta_true.baseline, data.theta_true, desk_grid)
    for i, y in enumerate(data.census.years):
        ratio = data.census.counts[i] / traj.at(y)
        assert np.all(ratio > 0.2) and np.all(ratio < 5.0)


def test_simulate_dataset_requires_post_baseline_census(desk_hyper, desk_grid):
    bare = ModelGrid(start_year=1960, end_year=1975, open_age=15,
                     fert_min_age=10, fert_max_age=15, census_years=(1960,))
    initial = make_theta(desk_grid, seed=1)
    with pytest.raises(ValueError):
        simulate_dataset(bare, initial, desk_hyper, seed=0)


def test_prior_sample_shapes_and_determinism(desk_grid, desk_hyper):
    initial = make_theta(desk_grid, seed=1)
    s = prior_sample(initial, desk_hyper, desk_grid, n_draws=8, seed=3)
    assert s.n_draws == 8
    assert s.draws["survival"].shape == (8,) + initial.survival.shape
    assert s.sigma2.shape == (8, 5)
    assert np.all(s.sigma2 > 0)
    s2 = prior_sample(initial, desk_hyper, desk_grid, n_draws=8, seed=3)
    assert np.array_equal(s.flat(), s2.flat())
    # every retained draw satisfies positivity
    for i in range(8):
        theta = s.theta_at(i)
        assert positivity_indicator(project_full(theta.baseline, theta,
                                                 desk_grid)) == 1


def test_prior_sample_variances_vary(desk_grid, desk_hyper):
    initial = make_theta(desk_grid, seed=1)
    s = prior_sample(initial, desk_hyper, desk_grid, n_draws=6, seed=0)
    assert np.unique(s.sigma2[:, 0]).size == 6


def test_hyperparameters_shrink_with_eta(desk_grid):
    """Smaller elicited relative error concentrates the variance prior."""
    initial = make_theta(desk_grid, seed=1)
    wide = beta_from_elicitation(flat_elicitation(0.2), initial)
    narrow = beta_from_elicitation(flat_elicitation(0.02), initial)
    for cls in PARAM_CLASSES:
        assert narrow.beta[cls] < wide.beta[cls]
