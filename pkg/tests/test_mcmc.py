"""Sampler mechanics: retention arithmetic, determinism (serial, parallel,
and across calls), the conjugate mean update against its closed form, and
statistical sanity of the posterior on small fixtures."""

import math

import numpy as np
import pytest

from sentssm import mcmc, model, synth


def _small_panel(seed=0, J=2, T=30, **kw):
    base = dict(
        theta=(0.8,) * J,
        mu=tuple(np.linspace(-0.2, 0.2, J)),
        sigma_eta=(0.06,) * J,
        sigma=(0.2,) * J,
        n_windows=T,
        weight_law="constant",
        weight_mean=10.0,
    )
    base.update(kw)
    cfg = synth.SynthConfig(**base)
    panel, x = synth.generate_panel(cfg, np.random.default_rng(seed))
    return panel, x, cfg


# ------------------------------------------------------------- run plumbing

def test_retention_arithmetic():
    cfg = mcmc.RunConfig(chains=1, iterations=100, burn_in=20, thin=8, base_seed=1)
    assert cfg.retained_per_chain == 10
    panel, _, _ = _small_panel(T=10, J=1)
    out = mcmc.run_chain(panel, model.ModelSpec("hierarchical"), cfg, 0)
    assert out["params"].shape[0] == 10
    assert out["latent"].shape == (10, 10, 1)


def test_full_scale_retention():
    cfg = mcmc.full_scale_config()
    assert cfg.chains == 3
    assert cfg.iterations == 255_000
    assert cfg.burn_in == 5_000
    assert cfg.thin == 25
    assert cfg.retained_per_chain == 10_000


def test_run_config_validation():
    with pytest.raises(ValueError):
        mcmc.RunConfig(iterations=100, burn_in=100)
    with pytest.raises(ValueError):
        mcmc.RunConfig(thin=0)
    with pytest.raises(ValueError):
        mcmc.RunConfig(adapt_iterations=6000, burn_in=5000)
    with pytest.raises(ValueError):
        mcmc.RunConfig(chains=0)


def test_identical_seed_and_chain_id_bit_identical():
    panel, _, _ = _small_panel()
    cfg = mcmc.RunConfig(chains=1, iterations=400, burn_in=100, thin=3, base_seed=42)
    spec = model.ModelSpec("hierarchical")
    a = mcmc.run_chain(panel, spec, cfg, 0)
    b = mcmc.run_chain(panel, spec, cfg, 0)
    assert np.array_equal(a["params"], b["params"])
    assert np.array_equal(a["latent"], b["latent"])
    c = mcmc.run_chain(panel, spec, cfg, 1)
    assert not np.array_equal(a["params"], c["params"])


def test_parallel_and_serial_chains_identical():
    panel, _, _ = _small_panel()
    spec = model.ModelSpec("hierarchical")
    serial = mcmc.run_chains(
        panel, spec,
        mcmc.RunConfig(chains=2, iterations=400, burn_in=100, thin=3,
                       base_seed=9, workers=1),
    )
    parallel = mcmc.run_chains(
        panel, spec,
        mcmc.RunConfig(chains=2, iterations=400, burn_in=100, thin=3,
                       base_seed=9, workers=2),
    )
    assert np.array_equal(serial.params, parallel.params)
    assert np.array_equal(serial.latent, parallel.latent)


def test_pooled_draw_count_and_name_addressing():
    panel, _, _ = _small_panel()
    cfg = mcmc.RunConfig(chains=3, iterations=130, burn_in=100, thin=3, base_seed=3)
    draws = mcmc.run_chains(panel, model.ModelSpec("hierarchical"), cfg)
    assert draws.n_chains == 3
    assert draws.n_draws == 10
    name = f"theta[{panel.categories[0]}]"
    assert draws.extract(name).shape == (3, 10)
    assert draws.pooled(name).shape == (30,)
    assert set(draws.names()) == set(
        mcmc.param_names(panel.categories)
    )
    with pytest.raises(KeyError):
        draws.extract("nope")


def test_latent_summary_mode_bounds_memory():
    panel, _, _ = _small_panel()
    cfg = mcmc.RunConfig(chains=2, iterations=300, burn_in=100, thin=2,
                         base_seed=4, store_latent=False)
    draws = mcmc.run_chains(panel, model.ModelSpec("hierarchical"), cfg)
    assert draws.latent is None
    for key in ("q05", "q25", "q50", "q75", "q95", "mean"):
        assert draws.latent_summary[key].shape == panel.y.shape
    med = draws.latent_quantile(0.5)
    assert med.shape == panel.y.shape
    assert np.all(draws.latent_summary["q05"] <= med + 1e-12)


def test_retained_draws_have_finite_log_joint():
    panel, _, _ = _small_panel()
    spec = model.ModelSpec("hierarchical")
    cfg = mcmc.RunConfig(chains=1, iterations=600, burn_in=100, thin=25, base_seed=5)
    draws = mcmc.run_chains(panel, spec, cfg)
    cats = panel.categories
    n = np.nan_to_num(panel.n)
    for d in range(draws.n_draws):
        st = model.ParamState(
            theta_aux=model.logit(
                np.array([draws.params[0, d, draws.param_names.index(f"theta[{c}]")]
                          for c in cats])
            ),
            mu_u=model.u_from_mu(
                np.array([draws.params[0, d, draws.param_names.index(f"mu[{c}]")]
                          for c in cats])
            ),
            log_sigma_eta=np.log(
                np.array([draws.params[0, d, draws.param_names.index(f"sigma_eta[{c}]")]
                          for c in cats])
            ),
            log_sigma=np.log(
                np.array([draws.params[0, d, draws.param_names.index(f"sigma[{c}]")]
                          for c in cats])
            ),
            hypers=np.array([
                draws.params[0, d, draws.param_names.index("mu_theta")],
                math.log(draws.params[0, d, draws.param_names.index("sigma_theta")]),
                draws.params[0, d, draws.param_names.index("mu_log_sigma_eta")],
                math.log(
                    draws.params[0, d, draws.param_names.index("sigma_log_sigma_eta")]
                ),
                draws.params[0, d, draws.param_names.index("mu_log_sigma")],
                math.log(draws.params[0, d, draws.param_names.index("sigma_log_sigma")]),
            ]),
        )
        lj = model.log_joint(spec, st, draws.latent[0, d], panel.y, n)
        assert np.isfinite(lj)


# ------------------------------------------------------------ scalar pieces

def test_conjugate_mean_update_matches_closed_form():
    rng = np.random.default_rng(6)
    values = np.array([0.3, -0.1, 0.5, 0.2])
    family_sd = 0.6
    prior_mean, prior_sd = 0.0, 1.0
    post_var = 1.0 / (1.0 / prior_sd**2 + len(values) / family_sd**2)
    post_mean = post_var * (prior_mean / prior_sd**2 + values.sum() / family_sd**2)
    S = 100_000
    out = np.array([
        mcmc.draw_conjugate_mean(values, family_sd, prior_mean, prior_sd, rng)
        for _ in range(S)
    ])
    se_mean = math.sqrt(post_var / S)
    assert abs(out.mean() - post_mean) <= 3 * se_mean
    se_sd = math.sqrt(post_var) * math.sqrt(0.5 / (S - 1))
    assert abs(out.std(ddof=1) - math.sqrt(post_var)) <= 3 * se_sd


def test_huge_proposal_steps_never_propagate_non_finite_values():
    panel, _, _ = _small_panel(T=12, J=1)
    sampler = mcmc.GibbsSampler(panel, model.ModelSpec("hierarchical"))
    for k in sampler.log_step:
        sampler.log_step[k] = math.log(50.0)
    rng = np.random.default_rng(7)
    for i in range(300):
        sampler.sweep(rng, sweep_index=i, adapting=False)
    st = sampler.state
    for arr in (st.theta_aux, st.mu_u, st.log_sigma_eta, st.log_sigma, st.hypers):
        assert np.isfinite(arr).all()
    assert np.isfinite(sampler.x).all()


def test_data_informed_initialization_is_deterministic():
    panel, _, _ = _small_panel()
    a = mcmc.GibbsSampler(panel, model.ModelSpec("hierarchical")).state
    b = mcmc.GibbsSampler(panel, model.ModelSpec("hierarchical")).state
    assert np.array_equal(a.theta_aux, b.theta_aux)
    assert np.array_equal(a.mu_u, b.mu_u)
    assert np.all(a.theta_aux == 0.0)
    col_means = np.nanmean(panel.y, axis=0)
    assert np.allclose(a.mu, np.clip(col_means, -0.99, 0.99), atol=1e-12)


def test_shared_families_stay_constant_within_draws():
    panel, _, _ = _small_panel(J=3)
    cfg = mcmc.RunConfig(chains=1, iterations=300, burn_in=100, thin=5, base_seed=8)
    for variant, shared in (
        ("pooled", ("theta", "mu", "sigma_eta", "sigma")),
        ("partial-sigma", ("theta", "sigma_eta")),
    ):
        draws = mcmc.run_chains(panel, model.ModelSpec(variant), cfg)
        for base in shared:
            cols = np.stack(
                [draws.pooled(f"{base}[{c}]") for c in panel.categories]
            )
            assert np.ptp(cols, axis=0).max() == 0.0


def test_gibbs_sweep_functional_wrapper_leaves_input_untouched():
    panel, _, _ = _small_panel(T=12, J=1)
    spec = model.ModelSpec("hierarchical")
    st = model.initial_state(spec, 1)
    before = st.copy()
    out = mcmc.gibbs_sweep(st, panel, spec, np.random.default_rng(9))
    assert np.array_equal(st.theta_aux, before.theta_aux)
    assert np.array_equal(st.hypers, before.hypers)
    assert out is not st


# -------------------------------------------------------- posterior behavior

def test_prior_medians_recovered_without_data(prior_fit):
    theta = np.concatenate(
        [prior_fit.pooled(f"theta[{c}]") for c in prior_fit.categories]
    )
    sigma = np.concatenate(
        [prior_fit.pooled(f"sigma[{c}]") for c in prior_fit.categories]
    )
    sigma_eta = np.concatenate(
        [prior_fit.pooled(f"sigma_eta[{c}]") for c in prior_fit.categories]
    )
    mu = np.concatenate([prior_fit.pooled(f"mu[{c}]") for c in prior_fit.categories])
    assert abs(np.median(theta) - 0.5) < 0.03
    assert abs(np.median(mu)) < 0.03
    assert abs(np.median(sigma) - 0.15) < 0.015
    assert abs(np.median(sigma_eta) - 0.05) < 0.005


def test_posterior_contraction_with_longer_series():
    spec = model.ModelSpec("hierarchical")
    sds = {50: [], 100: []}
    for rep in range(5):
        for T in (50, 100):
            panel, _, _ = _small_panel(seed=100 + rep, J=1, T=T)
            cfg = mcmc.RunConfig(chains=1, iterations=4000, burn_in=1000,
                                 thin=3, base_seed=200 + rep)
            draws = mcmc.run_chains(panel, spec, cfg)
            sds[T].append(draws.pooled(f"theta[{panel.categories[0]}]").std())
    assert np.mean(sds[100]) <= np.mean(sds[50])


def test_partial_sigma_and_hierarchical_agree_at_single_category():
    panel, _, _ = _small_panel(seed=3, J=1, T=80)
    cfg = mcmc.RunConfig(chains=3, iterations=6000, burn_in=1000, thin=5,
                         base_seed=17)
    cat = panel.categories[0]
    a = mcmc.run_chains(panel, model.ModelSpec("hierarchical"), cfg)
    b = mcmc.run_chains(panel, model.ModelSpec("partial-sigma"), cfg)
    for name, tol in ((f"theta[{cat}]", 0.05), (f"mu[{cat}]", 0.05),
                      (f"sigma[{cat}]", 0.02), (f"sigma_eta[{cat}]", 0.02)):
        qa = np.quantile(a.pooled(name), [0.25, 0.5, 0.75])
        qb = np.quantile(b.pooled(name), [0.25, 0.5, 0.75])
        assert np.all(np.abs(qa - qb) < tol), (name, qa, qb)


def test_chain_failure_is_attributed():
    panel, _, _ = _small_panel(T=10, J=1)
    bad = panel.y.copy()
    bad[:] = np.inf
    broken = type(panel)(y=bad, n=panel.n, categories=panel.categories,
                         window_starts=panel.window_starts)
    cfg = mcmc.RunConfig(chains=2, iterations=40, burn_in=10, thin=2, base_seed=0)
    # the inf column means over the data-informed init are intentional noise
    with np.errstate(invalid="ignore"):
        with pytest.raises(RuntimeError, match="chain 0 failed"):
            mcmc.run_chains(broken, model.ModelSpec("hierarchical"), cfg)
