"""Interval-width validation: regress 90% posterior interval widths of the
latent states on information density, with category fixed effects and a
homoscedastic-variant interaction, by exact least squares."""

from dataclasses import dataclass
import logging

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betainc

logger = logging.getLogger(__name__)

TERM_INTERCEPT = "(Intercept)"
TERM_SLOPE = "1/sqrt(n_tj)"
TERM_HOMO = "I_homo"
TERM_INTERACTION = "I_homo × 1/sqrt(n_tj)"
DISPLAYED_TERMS = (TERM_INTERCEPT, TERM_SLOPE, TERM_HOMO, TERM_INTERACTION)


@dataclass(frozen=True)
class WidthRecord:
    t: int
    category: str
    w: float
    inv_sqrt_n: float
    variant_flag: int

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError("interval width must be positive")
        if not self.inv_sqrt_n > 0:
            raise ValueError("inv_sqrt_n must be positive")
        if self.variant_flag not in (0, 1):
            raise ValueError("variant_flag must be 0 or 1")


@dataclass
class RegressionResult:
    terms: list
    estimates: dict
    std_errors: dict
    t_values: dict
    p_values: dict
    n_obs: int
    r2: float
    adj_r2: float

    def displayed(self):
        """The four rows shown in the validation table (category effects
        are fitted but not displayed)."""
        return [
            {
                "term": t,
                "estimate": self.estimates[t],
                "std_error": self.std_errors[t],
                "t_value": self.t_values[t],
                "p_value": self.p_values[t],
            }
            for t in DISPLAYED_TERMS
        ]


def interval_widths(draws, panel) -> list:
    """One WidthRecord per observed cell: w_tj = Q0.95 - Q0.05 of the x_tj
    draws pooled across chains. Zero-width cells are excluded with a
    warning."""

    if draws.latent is None:
        raise ValueError("interval_widths needs stored latent draws")
    C, D, N, J = draws.latent.shape
    flat = draws.latent.reshape(C * D, N, J)
    q05 = np.quantile(flat, 0.05, axis=0)
    q95 = np.quantile(flat, 0.95, axis=0)
    w = q95 - q05
    n = np.asarray(panel.n, dtype=float)
    flag = 1 if draws.variant == "homoscedastic" else 0
    records = []
    skipped = 0
    for t in range(N):
        for j in range(J):
            if not n[t, j] > 0:
                continue
            if not w[t, j] > 0:
                skipped += 1
                continue
            records.append(
                WidthRecord(
                    t=t + 1,
                    category=panel.categories[j],
                    w=float(w[t, j]),
                    inv_sqrt_n=float(1.0 / np.sqrt(n[t, j])),
                    variant_flag=flag,
                )
            )
    if skipped:
        logger.warning("interval_widths: excluded %d zero-width cells", skipped)
    return records


def _design(records):
    cats = []
    for r in records:
        if r.category not in cats:
            cats.append(r.category)
    if len(cats) < 2:
        raise ValueError("need at least 2 categories for fixed effects")
    flags = {r.variant_flag for r in records}
    if flags != {0, 1}:
        raise ValueError("need records from both variants (flags 0 and 1)")
    baseline = cats[0]
    terms = list(DISPLAYED_TERMS) + [f"category[{c}]" for c in cats[1:]]
    n = len(records)
    X = np.zeros((n, len(terms)))
    y = np.empty(n)
    cat_col = {c: 4 + i for i, c in enumerate(cats[1:])}
    for i, r in enumerate(records):
        X[i, 0] = 1.0
        X[i, 1] = r.inv_sqrt_n
        X[i, 2] = r.variant_flag
        X[i, 3] = r.variant_flag * r.inv_sqrt_n
        if r.category != baseline:
            X[i, cat_col[r.category]] = 1.0
        y[i] = r.w
    return X, y, terms


def ols_qr(X: np.ndarray, y: np.ndarray, terms=None):
    """Least squares through a thin QR factorization; returns estimates,
    classical standard errors, t-statistics, two-sided p-values, and fit
    statistics. Rank deficiency names the offending columns."""

    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more rows ({n}) than columns ({p})")
    terms = list(terms) if terms is not None else [f"x{i}" for i in range(p)]
    Q, R = np.linalg.qr(X)
    diag = np.abs(np.diag(R))
    tol = max(n, p) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    bad = [terms[i] for i in range(p) if diag[i] <= tol]
    if bad:
        raise ValueError(f"rank-deficient design; offending columns: {', '.join(bad)}")
    beta = solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    df = n - p
    s2 = rss / df
    r_inv = solve_triangular(R, np.eye(p))
    cov = (r_inv @ r_inv.T) * s2
    se = np.sqrt(np.diag(cov))
    tval = beta / se
    pval = student_t_sf_twosided(tval, df)
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else float("nan")
    adj = 1.0 - (1.0 - r2) * (n - 1) / df if tss > 0 else float("nan")
    return beta, se, tval, pval, r2, adj


def student_t_sf_twosided(t, df: int) -> np.ndarray:
    """Two-sided p-value 2 * P(T_df >= |t|) through the regularized
    incomplete beta function; values below 1e-300 report as exactly 0."""

    t = np.atleast_1d(np.asarray(t, dtype=float))
    p = betainc(df / 2.0, 0.5, df / (df + t * t))
    p = np.where(p < 1e-300, 0.0, p)
    return p


def fit_width_regression(records) -> RegressionResult:
    """OLS of width on [1, 1/sqrt(n), I_homo, I_homo/sqrt(n), category
    dummies] over the pooled records of both variants. Baseline category is
    the first seen in record order (panel ordering)."""

    X, y, terms = _design(list(records))
    beta, se, tval, pval, r2, adj = ols_qr(X, y, terms)
    return RegressionResult(
        terms=terms,
        estimates=dict(zip(terms, beta.tolist())),
        std_errors=dict(zip(terms, se.tolist())),
        t_values=dict(zip(terms, tval.tolist())),
        p_values=dict(zip(terms, pval.tolist())),
        n_obs=X.shape[0],
        r2=r2,
        adj_r2=adj,
    )


def marginal_effects(res: RegressionResult):
    """Slopes of width in 1/sqrt(n): (heteroscedastic, homoscedastic) =
    (beta1, beta1 + beta3)."""

    b1 = res.estimates[TERM_SLOPE]
    b3 = res.estimates[TERM_INTERACTION]
    return b1, b1 + b3
