"""Scalar-state Kalman kernels: the hot inner loops of the sampler.

Every kernel is a pure function of plain ndarrays and floats, so the
numba-compiled path and the pure-numpy fallback produce bit-identical
output. Randomness never enters a kernel; callers pre-draw standard
normals and pass them in.

Set ``SENTSSM_NO_NUMBA=1`` to force the fallback (or it engages
automatically when numba is not importable). ``USING_NUMBA`` reports
which path is active; ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

import numpy as np

LOG_2PI = 1.8378770664093453
VAR_FLOOR = 1e-12  # guards catastrophic cancellation in the scalar update


def _numba_enabled() -> bool:
    if os.environ.get("SENTSSM_NO_NUMBA", "").strip().lower() in ("1", "true", "yes"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _kalman_loglik(y, obs, n, theta, mu, sig_eta2, sig2, hetero):
    """Marginal log-likelihood of one category's series, states integrated out.

    y: observations with arbitrary values at masked-out cells; obs: boolean
    mask (True = observed); n: effective weights. Initialization follows the
    model's own first-state law (mean mu, variance sig_eta2), not the
    stationary AR(1) variance.
    """
    N = y.shape[0]
    ll = 0.0
    m_pred = mu
    p_pred = sig_eta2
    for t in range(N):
        if obs[t]:
            r = sig2 / n[t] if hetero else sig2
            s = p_pred + r
            d = y[t] - m_pred
            ll += -0.5 * (LOG_2PI + np.log(s) + d * d / s)
            k = p_pred / s
            m = m_pred + k * d
            p = p_pred - k * p_pred
            if p < VAR_FLOOR:
                p = VAR_FLOOR
        else:
            m = m_pred
            p = p_pred
        m_pred = (1.0 - theta) * mu + theta * m
        p_pred = theta * theta * p + sig_eta2
    return ll


def _kalman_pass(y, obs, n, theta, mu, sig_eta2, sig2, hetero):
    """Full forward pass: filtered/predicted moments plus the marginal loglik."""
    N = y.shape[0]
    fm = np.empty(N)
    fv = np.empty(N)
    pm = np.empty(N)
    pv = np.empty(N)
    ll = 0.0
    m_pred = mu
    p_pred = sig_eta2
    for t in range(N):
        pm[t] = m_pred
        pv[t] = p_pred
        if obs[t]:
            r = sig2 / n[t] if hetero else sig2
            s = p_pred + r
            d = y[t] - m_pred
            ll += -0.5 * (LOG_2PI + np.log(s) + d * d / s)
            k = p_pred / s
            fm[t] = m_pred + k * d
            p = p_pred - k * p_pred
            fv[t] = p if p > VAR_FLOOR else VAR_FLOOR
        else:
            fm[t] = m_pred
            fv[t] = p_pred
        m_pred = (1.0 - theta) * mu + theta * fm[t]
        p_pred = theta * theta * fv[t] + sig_eta2
    return fm, fv, pm, pv, ll


def _backward_sample(fm, fv, pm, pv, theta, z):
    """Joint draw of the state path given the filter pass; z are N(0,1) draws."""
    N = fm.shape[0]
    x = np.empty(N)
    x[N - 1] = fm[N - 1] + np.sqrt(fv[N - 1]) * z[N - 1]
    for t in range(N - 2, -1, -1):
        g = theta * fv[t] / pv[t + 1]
        mean = fm[t] + g * (x[t + 1] - pm[t + 1])
        var = fv[t] - g * g * pv[t + 1]
        if var < VAR_FLOOR:
            var = VAR_FLOOR
        x[t] = mean + np.sqrt(var) * z[t]
    return x


def _smooth_pass(fm, fv, pm, pv, theta):
    """Backward marginal smoothing recursion over the filter pass."""
    N = fm.shape[0]
    sm = np.empty(N)
    sv = np.empty(N)
    sm[N - 1] = fm[N - 1]
    sv[N - 1] = fv[N - 1]
    for t in range(N - 2, -1, -1):
        g = theta * fv[t] / pv[t + 1]
        sm[t] = fm[t] + g * (sm[t + 1] - pm[t + 1])
        sv[t] = fv[t] + g * g * (sv[t + 1] - pv[t + 1])
    return sm, sv


USING_NUMBA = _numba_enabled()

if USING_NUMBA:
    from numba import njit

    kalman_loglik = njit(cache=True, nogil=True)(_kalman_loglik)
    kalman_pass = njit(cache=True, nogil=True)(_kalman_pass)
    backward_sample = njit(cache=True, nogil=True)(_backward_sample)
    smooth_pass = njit(cache=True, nogil=True)(_smooth_pass)
else:
    kalman_loglik = _kalman_loglik
    kalman_pass = _kalman_pass
    backward_sample = _backward_sample
    smooth_pass = _smooth_pass


def warm_up():
    """Trigger JIT compilation of every kernel (no-op on the fallback path)."""
    y = np.zeros(3)
    obs = np.array([True, False, True])
    n = np.ones(3)
    kalman_loglik(y, obs, n, 0.5, 0.0, 0.01, 0.01, True)
    fm, fv, pm, pv, _ = kalman_pass(y, obs, n, 0.5, 0.0, 0.01, 0.01, True)
    backward_sample(fm, fv, pm, pv, 0.5, np.zeros(3))
    smooth_pass(fm, fv, pm, pv, 0.5)
