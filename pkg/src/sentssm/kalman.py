"""Exact inference for a single category's scalar state-space model.

Wraps the compiled kernels with input validation and a result container.
All functions take the series for one category: y (NaN = missing), n
(effective weights, ignored under homoscedastic noise), and scalar
parameters on their natural scales.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import backward_sample, kalman_loglik, kalman_pass, smooth_pass


@dataclass
class FilterResult:
    """Forward-pass output: filtered and one-step-ahead predicted moments
    plus the marginal log-likelihood."""

    filtered_mean: np.ndarray
    filtered_var: np.ndarray
    predicted_mean: np.ndarray
    predicted_var: np.ndarray
    loglik: float


def _prepare(y, n, theta, mu, sigma_eta, sigma, heteroscedastic):
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] == 0:
        raise ValueError("y must be a non-empty 1-d array")
    if n is None:
        n = np.ones_like(y)
    else:
        n = np.ascontiguousarray(n, dtype=np.float64)
        if n.shape != y.shape:
            raise ValueError("n must match y in shape")
    obs = ~np.isnan(y)
    if heteroscedastic and np.any(obs & ~(n > 0)):
        raise ValueError("observed cells need positive weights n under weight-scaled noise")
    if not (0.0 <= theta <= 1.0):
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not sigma_eta > 0:
        raise ValueError(f"sigma_eta must be positive, got {sigma_eta}")
    y_filled = np.where(obs, y, 0.0)  # kernel never reads masked cells
    return y_filled, obs, n


def marginal_loglik(y, n, theta, mu, sigma_eta, sigma, heteroscedastic=True) -> float:
    """Log-likelihood of the observed cells with the latent path integrated
    out."""

    y_filled, obs, n = _prepare(y, n, theta, mu, sigma_eta, sigma, heteroscedastic)
    return float(
        kalman_loglik(
            y_filled, obs, n, float(theta), float(mu),
            float(sigma_eta) ** 2, float(sigma) ** 2, bool(heteroscedastic),
        )
    )


def kalman_filter(y, n, theta, mu, sigma_eta, sigma, heteroscedastic=True) -> FilterResult:
    y_filled, obs, n = _prepare(y, n, theta, mu, sigma_eta, sigma, heteroscedastic)
    fm, fv, pm, pv, ll = kalman_pass(
        y_filled, obs, n, float(theta), float(mu),
        float(sigma_eta) ** 2, float(sigma) ** 2, bool(heteroscedastic),
    )
    return FilterResult(fm, fv, pm, pv, float(ll))


def ffbs_sample(filt: FilterResult, theta, rng=None, z=None) -> np.ndarray:
    """Draw one latent path from its joint smoothing distribution.

    Pass either an rng (standard normals drawn here) or a pre-drawn z
    vector of N(0,1) variates, one per time point.
    """

    N = filt.filtered_mean.shape[0]
    if z is None:
        if rng is None:
            raise ValueError("ffbs_sample needs an rng or a z vector")
        z = rng.standard_normal(N)
    else:
        z = np.ascontiguousarray(z, dtype=np.float64)
        if z.shape != (N,):
            raise ValueError("z must have one draw per time point")
    return backward_sample(
        filt.filtered_mean, filt.filtered_var,
        filt.predicted_mean, filt.predicted_var,
        float(theta), z,
    )


def rts_smoother(filt: FilterResult, theta):
    """Marginal smoothed means and variances for every time point."""

    sm, sv = smooth_pass(
        filt.filtered_mean, filt.filtered_var,
        filt.predicted_mean, filt.predicted_var,
        float(theta),
    )
    return sm, sv


def smoother_lag1_cov(filt: FilterResult, theta) -> np.ndarray:
    """Cov(x_t, x_{t+1} | y) for t = 1..N-1, from the smoothing recursion."""

    _, sv = rts_smoother(filt, theta)
    fv = filt.filtered_var
    pv = filt.predicted_var
    gain = theta * fv[:-1] / pv[1:]
    return gain * sv[1:]
