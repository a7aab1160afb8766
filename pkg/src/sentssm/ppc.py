"""Posterior predictive checks: coverage of replicate intervals, a
mean-statistic p-value, and the probability of out-of-range replicates."""

from dataclasses import dataclass

import numpy as np

MIN_DRAWS = 500


@dataclass
class PpcReport:
    """Per-category PPC metrics, all in [0, 1]."""

    categories: list
    cov80: dict
    cov95: dict
    p_mean: dict
    p_out: dict
    n_draws: int = 0

    def row(self, category):
        return {
            "category": category,
            "cov80": self.cov80[category],
            "cov95": self.cov95[category],
            "p_mean": self.p_mean[category],
            "p_out": self.p_out[category],
        }

    def rows(self):
        return [self.row(c) for c in self.categories]


def replicate(draws, panel, spec, rng) -> np.ndarray:
    """Replicated observations, one per retained draw: (S, N, J) with
    y_rep ~ Normal(x_draw, sigma_draw^2 / n) (or sigma_draw^2 under the
    homoscedastic variant). Unobserved cells are NaN."""

    if draws.latent is None:
        raise ValueError("replicate needs stored latent draws")
    C, D, N, J = draws.latent.shape
    x = draws.latent.reshape(C * D, N, J)
    sigma = np.stack(
        [draws.pooled(f"sigma[{c}]") for c in panel.categories], axis=1
    )  # (S, J)
    n = np.asarray(panel.n, dtype=float)
    obs = ~np.isnan(np.asarray(panel.y, dtype=float))
    sd = sigma[:, None, :]
    if spec.heteroscedastic:
        denom = np.sqrt(np.where(n > 0, n, np.nan))
        sd = sd / denom[None, :, :]
    z = rng.standard_normal((C * D, N, J))
    y_rep = x + sd * z
    y_rep[:, ~obs] = np.nan
    return y_rep


def ppc_summary(y_rep: np.ndarray, panel) -> PpcReport:
    """Coverage of central 80%/95% empirical replicate intervals, the
    one-sided p-value P(mean_t(rep) >= mean_t(obs)), and the fraction of
    replicate values outside [-1, 1], per category.

    Intervals use the default linear (type-7) interpolation of np.quantile.
    """

    S = y_rep.shape[0]
    if S < MIN_DRAWS:
        raise ValueError(f"need at least {MIN_DRAWS} replicate draws, got {S}")
    y = np.asarray(panel.y, dtype=float)
    cov80, cov95, p_mean, p_out = {}, {}, {}, {}
    for j, cat in enumerate(panel.categories):
        obs = ~np.isnan(y[:, j])
        if not obs.any():
            cov80[cat] = cov95[cat] = p_mean[cat] = p_out[cat] = float("nan")
            continue
        rep = y_rep[:, obs, j]  # (S, T_obs)
        yo = y[obs, j]
        lo80, hi80 = np.quantile(rep, [0.10, 0.90], axis=0)
        lo95, hi95 = np.quantile(rep, [0.025, 0.975], axis=0)
        cov80[cat] = float(np.mean((yo >= lo80) & (yo <= hi80)))
        cov95[cat] = float(np.mean((yo >= lo95) & (yo <= hi95)))
        p_mean[cat] = float(np.mean(rep.mean(axis=1) >= yo.mean()))
        p_out[cat] = float(np.mean((rep < -1.0) | (rep > 1.0)))
    return PpcReport(
        categories=list(panel.categories),
        cov80=cov80, cov95=cov95, p_mean=p_mean, p_out=p_out, n_draws=S,
    )
