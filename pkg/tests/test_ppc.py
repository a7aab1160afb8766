"""Posterior predictive machinery on hand-built draws: scaling laws,
degenerate-noise collapse, the one-sided mean p-value convention, and
self-consistency of interval coverage."""

from datetime import date, timedelta

import numpy as np
import pytest

from sentssm import mcmc, model, ppc
from sentssm import panel as pn


def _panel(y, n):
    y = np.asarray(y, dtype=float)
    n = np.asarray(n, dtype=float)
    N, J = y.shape
    starts = [date(2024, 1, 1) + timedelta(weeks=t) for t in range(N)]
    return pn.SentimentPanel(
        y=y, n=n, categories=[f"c{j}" for j in range(J)], window_starts=starts
    )


def _draws(latent, sigma_by_cat, categories):
    """PosteriorDraws with constant parameters and supplied latent draws;
    latent has shape (S, N, J) and is stored as a single chain."""

    S, N, J = latent.shape
    names = mcmc.param_names(categories)
    params = np.zeros((1, S, len(names)))
    for j, c in enumerate(categories):
        params[0, :, names.index(f"sigma[{c}]")] = sigma_by_cat[j]
        params[0, :, names.index(f"theta[{c}]")] = 0.5
        params[0, :, names.index(f"sigma_eta[{c}]")] = 0.05
    cfg = mcmc.RunConfig(chains=1, iterations=S + 1, burn_in=0, thin=1, base_seed=0)
    return mcmc.PosteriorDraws(
        param_names=names,
        params=params,
        categories=list(categories),
        window_starts=[date(2024, 1, 1) + timedelta(weeks=t) for t in range(N)],
        variant="hierarchical",
        config=cfg,
        latent=latent[None],
    )


SPEC = model.ModelSpec("hierarchical")


def test_tiny_sigma_collapses_replicates_onto_latent():
    rng = np.random.default_rng(0)
    S, N, J = 600, 12, 2
    latent = rng.normal(0, 0.2, (S, N, J))
    panel = _panel(np.zeros((N, J)), np.ones((N, J)))
    draws = _draws(latent, [1e-9, 1e-9], panel.categories)
    y_rep = ppc.replicate(draws, panel, SPEC, np.random.default_rng(1))
    assert np.nanmax(np.abs(y_rep - latent)) < 1e-6


def test_doubling_weight_shrinks_spread_by_sqrt2():
    S, N, J = 4000, 6, 1
    latent = np.zeros((S, N, J))
    y = np.zeros((N, J))
    draws = _draws(latent, [0.3], ["c0"])
    rep1 = ppc.replicate(draws, _panel(y, np.full((N, J), 5.0)),
                         SPEC, np.random.default_rng(3))
    rep2 = ppc.replicate(draws, _panel(y, np.full((N, J), 10.0)),
                         SPEC, np.random.default_rng(3))
    ratio = np.nanstd(rep1) / np.nanstd(rep2)
    assert ratio == pytest.approx(np.sqrt(2.0), rel=0.05)


def test_homoscedastic_variant_ignores_weights():
    rng = np.random.default_rng(4)
    S, N, J = 2000, 8, 1
    latent = np.zeros((S, N, J))
    y = np.zeros((N, J))
    spec_h = model.ModelSpec("homoscedastic")
    rep_small = ppc.replicate(_draws(latent, [0.2], ["c0"]),
                              _panel(y, np.full((N, J), 2.0)), spec_h,
                              np.random.default_rng(5))
    rep_large = ppc.replicate(_draws(latent, [0.2], ["c0"]),
                              _panel(y, np.full((N, J), 50.0)), spec_h,
                              np.random.default_rng(5))
    assert np.array_equal(rep_small, rep_large)


def test_replicate_mean_tracks_posterior_latent_mean():
    rng = np.random.default_rng(6)
    S, N, J = 5000, 10, 1
    latent = rng.normal(0.1, 0.05, (S, N, J))
    panel = _panel(np.zeros((N, J)), np.full((N, J), 20.0))
    y_rep = ppc.replicate(_draws(latent, [0.2], ["c0"]), panel, SPEC,
                          np.random.default_rng(7))
    post_mean = latent.mean(axis=0)[:, 0]
    rep_mean = np.nanmean(y_rep, axis=0)[:, 0]
    mc_se = 0.2 / np.sqrt(20.0 * S)
    assert np.all(np.abs(rep_mean - post_mean) < 5 * np.sqrt(mc_se**2 + 0.05**2 / S))


def test_replicate_marks_unobserved_cells_nan():
    S, N, J = 600, 5, 2
    latent = np.zeros((S, N, J))
    y = np.zeros((N, J))
    n = np.ones((N, J))
    y[3, 1] = np.nan
    n[3, 1] = 0.0
    panel = _panel(y, n)
    y_rep = ppc.replicate(_draws(latent, [0.2, 0.2], panel.categories), panel,
                          SPEC, np.random.default_rng(8))
    assert np.all(np.isnan(y_rep[:, 3, 1]))
    assert not np.any(np.isnan(y_rep[:, 2, :]))


def test_replicate_deterministic_given_seed():
    S, N, J = 600, 5, 1
    latent = np.random.default_rng(9).normal(0, 0.1, (S, N, J))
    panel = _panel(np.zeros((N, J)), np.ones((N, J)))
    d = _draws(latent, [0.15], ["c0"])
    a = ppc.replicate(d, panel, SPEC, np.random.default_rng(10))
    b = ppc.replicate(d, panel, SPEC, np.random.default_rng(10))
    assert np.array_equal(a, b)


def test_replicate_requires_latent():
    d = _draws(np.zeros((600, 4, 1)), [0.2], ["c0"])
    d.latent = None
    with pytest.raises(ValueError):
        ppc.replicate(d, _panel(np.zeros((4, 1)), np.ones((4, 1))), SPEC,
                      np.random.default_rng(0))


# ----------------------------------------------------------------- summary

def test_summary_requires_enough_draws():
    y_rep = np.zeros((499, 4, 1))
    with pytest.raises(ValueError):
        ppc.ppc_summary(y_rep, _panel(np.zeros((4, 1)), np.ones((4, 1))))


def test_self_consistent_coverage_near_nominal():
    # y_obs drawn from the same law as the replicates: coverage must sit at
    # the nominal levels up to MC error
    rng = np.random.default_rng(11)
    S, N = 4000, 400
    y_rep = rng.normal(0, 0.1, (S, N, 1))
    y_obs = rng.normal(0, 0.1, (N, 1))
    panel = _panel(y_obs, np.ones((N, 1)))
    rep = ppc.ppc_summary(y_rep, panel)
    c = panel.categories[0]
    assert rep.cov80[c] == pytest.approx(0.80, abs=0.06)
    assert rep.cov95[c] == pytest.approx(0.95, abs=0.035)
    assert 0.05 < rep.p_mean[c] < 0.95
    assert rep.p_out[c] == 0.0
    assert rep.cov80[c] <= rep.cov95[c] + 0.01
    assert rep.n_draws == S


def test_p_mean_is_one_sided():
    S, N = 600, 20
    y_rep = np.full((S, N, 1), 0.5)
    panel = _panel(np.zeros((N, 1)), np.ones((N, 1)))
    rep = ppc.ppc_summary(y_rep, panel)
    c = panel.categories[0]
    assert rep.p_mean[c] == 1.0
    # ties count as "greater or equal"
    rep_eq = ppc.ppc_summary(np.zeros((S, N, 1)), panel)
    assert rep_eq.p_mean[c] == 1.0


def test_p_out_counts_out_of_range_replicates():
    S, N = 600, 10
    rng = np.random.default_rng(12)
    y_rep = rng.normal(0, 0.01, (S, N, 1))
    y_rep[:150, 0, 0] = 1.5
    panel = _panel(np.zeros((N, 1)), np.ones((N, 1)))
    rep = ppc.ppc_summary(y_rep, panel)
    want = 150.0 / (S * N)
    assert rep.p_out[panel.categories[0]] == pytest.approx(want, abs=1e-12)


def test_all_missing_category_reports_nan():
    S, N = 600, 8
    y = np.column_stack([np.zeros(N), np.full(N, np.nan)])
    n = np.column_stack([np.ones(N), np.zeros(N)])
    panel = _panel(y, n)
    y_rep = np.zeros((S, N, 2))
    y_rep[:, :, 1] = np.nan
    rep = ppc.ppc_summary(y_rep, panel)
    c1 = panel.categories[1]
    assert np.isnan(rep.cov80[c1]) and np.isnan(rep.p_mean[c1])
    row = rep.row(panel.categories[0])
    assert set(row) == {"category", "cov80", "cov95", "p_mean", "p_out"}
    assert len(rep.rows()) == 2
