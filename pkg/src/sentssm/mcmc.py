"""Metropolis-within-Gibbs sampler over the marginalized state-space model.

One sweep is: (a) random-walk MH on every unconstrained scalar parameter
against the Kalman marginal likelihood times its hierarchical prior (latent
states integrated out), (b) exact conjugate draws of the hyper means and
log-scale MH on the hyper scales, (c) a joint FFBS redraw of the latent
paths. Shared families under the pooling variants are updated once against
the pooled likelihood.

Step sizes adapt by Robbins-Monro toward a target acceptance rate during
the first adapt_iterations sweeps and are frozen afterwards, so the
post-adaptation kernel leaves the posterior invariant.

Chains are reproducible: chain c draws from default_rng(SeedSequence(
base_seed, spawn_key=(c,))), and every kernel is deterministic, so serial
and process-parallel execution give identical output.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import math

import numpy as np

from ._kernels import backward_sample, kalman_loglik, kalman_pass
from .model import (
    FAMILIES,
    HIER_FAMILIES,
    HYPER_NAMES,
    ModelSpec,
    ParamState,
    family_hyper_names,
    initial_state,
    log_normal_pdf,
    u_from_mu,
)
from .panel import SentimentPanel

DEFAULT_TARGET_ACCEPT = 0.44
ADAPT_DECAY = 0.6
INITIAL_STEP = 0.5
LOG_SIGMA_FLOOR = math.log(0.01)

LATENT_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


@dataclass(frozen=True)
class RunConfig:
    chains: int = 3
    iterations: int = 20_000
    burn_in: int = 5_000
    thin: int = 5
    base_seed: int = 0
    adapt_iterations: int = -1  # -1 means "equal to burn_in"
    target_accept: float = DEFAULT_TARGET_ACCEPT
    store_latent: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.adapt_iterations > self.burn_in:
            raise ValueError("adapt_iterations must not exceed burn_in")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")

    @property
    def adapt_sweeps(self) -> int:
        return self.burn_in if self.adapt_iterations < 0 else self.adapt_iterations

    @property
    def retained_per_chain(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


def full_scale_config(**overrides) -> RunConfig:
    """Full-scale protocol: 3 chains of 255,000 sweeps, burn-in 5,000,
    thin 25, giving 10,000 retained draws per chain."""

    base = dict(chains=3, iterations=255_000, burn_in=5_000, thin=25)
    base.update(overrides)
    return RunConfig(**base)


@dataclass
class PosteriorDraws:
    """Retained draws across chains on natural scales, addressable by name.

    params has shape (chains, draws, n_params); latent has shape
    (chains, draws, N, J) or is None when only quantile summaries were
    kept (latent_summary maps e.g. 'q05' to an (N, J) matrix averaged
    over chains).
    """

    param_names: list
    params: np.ndarray
    categories: list
    window_starts: list
    variant: str
    config: RunConfig
    latent: np.ndarray = None
    latent_summary: dict = None
    chain_info: list = field(default_factory=list)

    def names(self):
        return list(self.param_names)

    def extract(self, name: str) -> np.ndarray:
        """(chains, draws) matrix for one monitored scalar."""
        try:
            idx = self.param_names.index(name)
        except ValueError:
            raise KeyError(f"unknown parameter {name!r}") from None
        return self.params[:, :, idx]

    def pooled(self, name: str) -> np.ndarray:
        return self.extract(name).reshape(-1)

    @property
    def n_chains(self) -> int:
        return self.params.shape[0]

    @property
    def n_draws(self) -> int:
        return self.params.shape[1]

    def latent_quantile(self, q: float) -> np.ndarray:
        """(N, J) pooled posterior quantile of the latent paths."""
        if self.latent is not None:
            flat = self.latent.reshape(-1, *self.latent.shape[2:])
            return np.quantile(flat, q, axis=0)
        key = f"q{int(round(q * 100)):02d}"
        if self.latent_summary and key in self.latent_summary:
            return self.latent_summary[key]
        raise ValueError(f"latent quantile {q} not stored; available: "
                         f"{sorted(self.latent_summary or {})}")

    def latent_mean(self) -> np.ndarray:
        if self.latent is not None:
            return self.latent.mean(axis=(0, 1))
        if self.latent_summary and "mean" in self.latent_summary:
            return self.latent_summary["mean"]
        raise ValueError("latent mean not stored")


def param_names(categories, include_hypers=True):
    names = []
    for base in ("theta", "mu", "sigma_eta", "sigma"):
        names.extend(f"{base}[{c}]" for c in categories)
    if include_hypers:
        names.extend(
            ["mu_theta", "sigma_theta",
             "mu_log_sigma_eta", "sigma_log_sigma_eta",
             "mu_log_sigma", "sigma_log_sigma"]
        )
    return names


def draw_conjugate_mean(values, family_sd, prior_mean, prior_sd, rng) -> float:
    """Exact normal-normal conjugate draw of a hyper location given k
    conditionally iid values with known family sd."""

    values = np.asarray(values, dtype=float)
    k = values.size
    prec = 1.0 / prior_sd**2 + k / family_sd**2
    post_var = 1.0 / prec
    post_mean = post_var * (prior_mean / prior_sd**2 + values.sum() / family_sd**2)
    return post_mean + math.sqrt(post_var) * rng.standard_normal()


def _accept_prob(delta: float) -> float:
    if math.isnan(delta):
        return 0.0
    if delta >= 0.0:
        return 1.0
    return math.exp(delta)


class GibbsSampler:
    """Sampler bound to one (panel, spec); owns the adaptive step sizes and
    cached per-category marginal log-likelihoods."""

    def __init__(self, panel: SentimentPanel, spec: ModelSpec,
                 target_accept: float = DEFAULT_TARGET_ACCEPT,
                 state: ParamState = None):
        y = np.asarray(panel.y, dtype=float)
        n = np.asarray(panel.n, dtype=float)
        if y.ndim != 2 or y.shape != n.shape:
            raise ValueError("panel y and n must be matching 2-d matrices")
        obs = ~np.isnan(y)
        if spec.heteroscedastic and np.any(obs & ~(n > 0)):
            raise ValueError("observed cells need positive n under weight-scaled noise")
        self.spec = spec
        self.N, self.J = y.shape
        # per-category contiguous rows for the kernels
        self.y_rows = np.ascontiguousarray(np.where(obs, y, 0.0).T)
        self.obs_rows = np.ascontiguousarray(obs.T)
        self.n_rows = np.ascontiguousarray(np.where(n > 0, n, 1.0).T)
        self.target_accept = target_accept
        self.state = state.copy() if state is not None else self._data_informed_init(y, n, obs)
        self.x = np.zeros((self.N, self.J))
        self.log_step = {}
        self.attempts = {}
        self.accepts = {}
        for family in FAMILIES:
            for key in self._update_keys(family):
                self.log_step[key] = math.log(INITIAL_STEP)
                self.attempts[key] = 0
                self.accepts[key] = 0
        for family in HIER_FAMILIES:
            key = ("hyper_scale", family)
            self.log_step[key] = math.log(INITIAL_STEP)
            self.attempts[key] = 0
            self.accepts[key] = 0
        self.ll = np.array([self._category_loglik(j, self.state) for j in range(self.J)])
        if not np.isfinite(self.ll.sum()):
            raise RuntimeError("non-finite log-likelihood at initialization")

    def _update_keys(self, family):
        if self.spec.shared(family):
            return [(family, -1)]
        return [(family, j) for j in range(self.J)]

    def _data_informed_init(self, y, n, obs) -> ParamState:
        state = initial_state(self.spec, self.J)
        mu0 = np.zeros(self.J)
        log_sig0 = np.full(self.J, math.log(0.15))
        for j in range(self.J):
            col = y[obs[:, j], j]
            if col.size:
                mu0[j] = float(np.clip(col.mean(), -0.99, 0.99))
            if col.size >= 2:
                sd = float(col.std(ddof=1))
                scale = sd * math.sqrt(float(n[obs[:, j], j].mean())) if self.spec.heteroscedastic else sd
                log_sig0[j] = max(LOG_SIGMA_FLOOR, math.log(max(scale, 1e-12)))
        state.mu_u = u_from_mu(mu0)
        state.log_sigma = log_sig0
        # shared families collapse to one value
        for family in FAMILIES:
            if self.spec.shared(family):
                vec = state.family(family)
                vec[:] = vec.mean()
        return state

    def _category_loglik(self, j: int, state: ParamState) -> float:
        return kalman_loglik(
            self.y_rows[j], self.obs_rows[j], self.n_rows[j],
            float(state.theta[j]), float(state.mu[j]),
            float(state.sigma_eta[j]) ** 2, float(state.sigma[j]) ** 2,
            self.spec.heteroscedastic,
        )

    def _loglik_with(self, j: int, family: str, value: float) -> float:
        s = self.state
        theta_aux = value if family == "theta_aux" else s.theta_aux[j]
        mu_u = value if family == "mu_u" else s.mu_u[j]
        lse = value if family == "log_sigma_eta" else s.log_sigma_eta[j]
        ls = value if family == "log_sigma" else s.log_sigma[j]
        try:
            sig_eta2 = math.exp(2.0 * lse)
            sig2 = math.exp(2.0 * ls)
        except OverflowError:
            return -math.inf
        if not (sig_eta2 > 0.0 and sig2 > 0.0):
            return -math.inf  # underflowed scale: reject, never propagate
        theta = _logistic(theta_aux)
        mu = 2.0 * _logistic(mu_u) - 1.0
        return kalman_loglik(
            self.y_rows[j], self.obs_rows[j], self.n_rows[j],
            theta, mu, sig_eta2, sig2, self.spec.heteroscedastic,
        )

    def _log_prior_scalar(self, family: str, value: float) -> float:
        if family == "mu_u":
            return -_softplus(value) - _softplus(-value)
        loc_name, logscale_name = family_hyper_names(family)
        loc = self.state.hyper(loc_name)
        sd = math.exp(self.state.hyper(logscale_name))
        return log_normal_pdf(value, loc, sd)

    def _update_scalar(self, family: str, key, rng, gamma: float):
        shared = key[1] < 0
        cat_list = list(range(self.J)) if shared else [key[1]]
        vec = self.state.family(family)
        cur = float(vec[cat_list[0]])
        step = math.exp(self.log_step[key])
        prop = cur + step * rng.standard_normal()
        delta = self._log_prior_scalar(family, prop) - self._log_prior_scalar(family, cur)
        prop_ll = np.empty(len(cat_list))
        for i, j in enumerate(cat_list):
            prop_ll[i] = self._loglik_with(j, family, prop)
        delta += float(prop_ll.sum() - self.ll[cat_list].sum())
        a = _accept_prob(delta)
        self.attempts[key] += 1
        if rng.random() < a:
            self.accepts[key] += 1
            for i, j in enumerate(cat_list):
                vec[j] = prop
                self.ll[j] = prop_ll[i]
        if gamma > 0.0:
            self._adapt_step(key, gamma, a)

    def _update_hyper_mean(self, family: str, rng):
        loc_name, logscale_name = family_hyper_names(family)
        hp = self.spec.hyperpriors
        vec = self.state.family(family)
        values = vec[:1] if self.spec.shared(family) else vec
        new = draw_conjugate_mean(
            values,
            math.exp(self.state.hyper(logscale_name)),
            hp.loc_mean(family),
            hp.loc_sd(family),
            rng,
        )
        self.state.set_hyper(loc_name, new)

    def _update_hyper_scale(self, family: str, rng, gamma: float):
        loc_name, logscale_name = family_hyper_names(family)
        hp = self.spec.hyperpriors
        vec = self.state.family(family)
        values = np.asarray(vec[:1] if self.spec.shared(family) else vec)
        loc = self.state.hyper(loc_name)
        cur = self.state.hyper(logscale_name)
        key = ("hyper_scale", family)
        step = math.exp(self.log_step[key])
        prop = cur + step * rng.standard_normal()

        def target(s):
            try:
                sd = math.exp(s)
            except OverflowError:
                return -math.inf
            if not sd > 0.0:
                return -math.inf
            z = (values - loc) / sd
            return (
                log_normal_pdf(s, hp.scale_logloc(family), hp.scale_logsd(family))
                + float(np.sum(-0.5 * (1.8378770664093453 + z * z))) - values.size * s
            )

        a = _accept_prob(target(prop) - target(cur))
        self.attempts[key] += 1
        if rng.random() < a:
            self.accepts[key] += 1
            self.state.set_hyper(logscale_name, prop)
        if gamma > 0.0:
            self._adapt_step(key, gamma, a)

    def _adapt_step(self, key, gamma: float, a: float):
        v = self.log_step[key] + gamma * (a - self.target_accept)
        self.log_step[key] = min(math.log(50.0), max(math.log(1e-4), v))

    def _redraw_latent(self, rng):
        s = self.state
        for j in range(self.J):
            fm, fv, pm, pv, _ = kalman_pass(
                self.y_rows[j], self.obs_rows[j], self.n_rows[j],
                float(s.theta[j]), float(s.mu[j]),
                float(s.sigma_eta[j]) ** 2, float(s.sigma[j]) ** 2,
                self.spec.heteroscedastic,
            )
            z = rng.standard_normal(self.N)
            self.x[:, j] = backward_sample(fm, fv, pm, pv, float(s.theta[j]), z)

    def sweep(self, rng, sweep_index: int = 0, adapting: bool = False):
        """One full Gibbs sweep, mutating the sampler state in place."""

        gamma = (sweep_index + 1.0) ** (-ADAPT_DECAY) if adapting else 0.0
        for family in FAMILIES:
            for key in self._update_keys(family):
                self._update_scalar(family, key, rng, gamma)
        for family in HIER_FAMILIES:
            self._update_hyper_mean(family, rng)
            self._update_hyper_scale(family, rng, gamma)
        self._redraw_latent(rng)

    def acceptance_rates(self) -> dict:
        out = {}
        for key, att in self.attempts.items():
            if not att:
                continue
            fam, idx = key
            if fam == "hyper_scale":
                label = f"hyper_scale[{idx}]"
            elif idx == -1:
                label = fam
            else:
                label = f"{fam}[{idx}]"
            out[label] = self.accepts[key] / att
        return out

    def reset_acceptance(self):
        for key in self.attempts:
            self.attempts[key] = 0
            self.accepts[key] = 0

    def record(self, out: np.ndarray):
        """Write the current draw onto one row of the retention buffer,
        natural scales, param_names order."""

        s = self.state
        J = self.J
        out[0:J] = s.theta
        out[J:2 * J] = s.mu
        out[2 * J:3 * J] = s.sigma_eta
        out[3 * J:4 * J] = s.sigma
        h = s.hypers  # HYPER_NAMES order: locations at even slots, log-scales odd
        out[4 * J + 0] = h[0]
        out[4 * J + 1] = math.exp(h[1])
        out[4 * J + 2] = h[2]
        out[4 * J + 3] = math.exp(h[3])
        out[4 * J + 4] = h[4]
        out[4 * J + 5] = math.exp(h[5])


def _softplus(x: float) -> float:
    if x > 30.0:
        return x
    return math.log1p(math.exp(x))


def _logistic(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


def gibbs_sweep(state: ParamState, panel: SentimentPanel, spec: ModelSpec, rng) -> ParamState:
    """Functional single sweep for tests and small experiments; run_chain is
    the efficient path."""

    sampler = GibbsSampler(panel, spec, state=state)
    sampler.sweep(rng)
    return sampler.state.copy()


def run_chain(panel: SentimentPanel, spec: ModelSpec, cfg: RunConfig, chain_id: int) -> dict:
    """One chain, fully deterministic given (base_seed, chain_id). Returns
    the retained parameter matrix, latent draws or their summaries, and
    acceptance statistics."""

    rng = np.random.default_rng(np.random.SeedSequence(cfg.base_seed, spawn_key=(chain_id,)))
    sampler = GibbsSampler(panel, spec, target_accept=cfg.target_accept)
    J = sampler.J
    n_params = 4 * J + 6
    keep = cfg.retained_per_chain
    params = np.empty((keep, n_params))
    latent = np.empty((keep, sampler.N, J)) if keep else np.empty((0, sampler.N, J))
    adapt = cfg.adapt_sweeps
    row = 0
    for i in range(cfg.iterations):
        if i == adapt:
            sampler.reset_acceptance()  # report post-adaptation rates only
        sampler.sweep(rng, sweep_index=i, adapting=i < adapt)
        k = i + 1
        if k > cfg.burn_in and (k - cfg.burn_in) % cfg.thin == 0 and row < keep:
            sampler.record(params[row])
            latent[row] = sampler.x
            row += 1
    if row != keep:
        raise RuntimeError(f"retention mismatch: kept {row}, expected {keep}")
    if keep and not np.isfinite(params).all():
        raise RuntimeError("non-finite retained draw")
    result = {
        "params": params,
        "info": {
            "chain_id": chain_id,
            "acceptance": sampler.acceptance_rates(),
            "step_sizes": {str(k): math.exp(v) for k, v in sampler.log_step.items()},
        },
    }
    if cfg.store_latent or keep == 0:
        result["latent"] = latent
    else:
        summary = {f"q{int(round(q * 100)):02d}": np.quantile(latent, q, axis=0)
                   for q in LATENT_QUANTILES}
        summary["mean"] = latent.mean(axis=0)
        result["latent_summary"] = summary
    return result


def _chain_task(args):
    return run_chain(*args)


def run_chains(panel: SentimentPanel, spec: ModelSpec, cfg: RunConfig) -> PosteriorDraws:
    """All chains, serial or process-parallel per cfg.workers; output is
    identical either way."""

    tasks = [(panel, spec, cfg, c) for c in range(cfg.chains)]
    results = [None] * cfg.chains
    if cfg.workers > 1 and cfg.chains > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.chains)) as pool:
            futures = {pool.submit(_chain_task, t): t[3] for t in tasks}
            for fut, cid in futures.items():
                try:
                    results[cid] = fut.result()
                except Exception as e:
                    raise RuntimeError(f"chain {cid} failed: {e}") from e
    else:
        for t in tasks:
            try:
                results[t[3]] = run_chain(*t)
            except Exception as e:
                raise RuntimeError(f"chain {t[3]} failed: {e}") from e

    params = np.stack([r["params"] for r in results])
    draws = PosteriorDraws(
        param_names=param_names(panel.categories),
        params=params,
        categories=list(panel.categories),
        window_starts=list(panel.window_starts),
        variant=spec.variant,
        config=cfg,
        chain_info=[r["info"] for r in results],
    )
    if "latent" in results[0]:
        draws.latent = np.stack([r["latent"] for r in results])
    else:
        keys = results[0]["latent_summary"].keys()
        draws.latent_summary = {
            k: np.mean([r["latent_summary"][k] for r in results], axis=0) for k in keys
        }
    return draws
