"""Article-to-panel aggregation: weekly weighted sentiment scores per category.

The pipeline is threshold_relevance -> aggregate -> filter_categories. Each
step is a pure function; records are never mutated in place.
"""

from dataclasses import dataclass, replace
from datetime import date, datetime, timedelta
import logging

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.25
DEFAULT_MAX_EMPTY_FRACTION = 0.10
PROB_SUM_TOL = 0.02


@dataclass(frozen=True)
class ArticleRecord:
    """One scored news item: identity, publication time, sentiment in
    [-1, 1], and a per-category relevance vector in [0, 1]."""

    id: str
    published_at: datetime
    sentiment: float
    relevance: tuple

    def __post_init__(self):
        if not -1.0 <= self.sentiment <= 1.0:
            raise ValueError(f"sentiment out of [-1, 1]: {self.sentiment}")
        for c in self.relevance:
            if not 0.0 <= c <= 1.0:
                raise ValueError(f"relevance entry out of [0, 1]: {c}")


@dataclass(frozen=True)
class WindowingConfig:
    window_start_date: date
    window_count: int
    window_length_days: int = 7

    def __post_init__(self):
        if self.window_length_days < 1:
            raise ValueError("window_length_days must be >= 1")
        if self.window_count < 2:
            raise ValueError("window_count must be >= 2")

    def window_starts(self):
        step = timedelta(days=self.window_length_days)
        return [self.window_start_date + i * step for i in range(self.window_count)]


@dataclass
class SentimentPanel:
    """The (y, n) matrices over windows (rows) and categories (columns).

    y is NaN exactly where n is 0; every observed y lies in [-1, 1].
    article_count and out_of_range carry bookkeeping from aggregation.
    """

    y: np.ndarray
    n: np.ndarray
    categories: list
    window_starts: list
    article_count: int = 0
    out_of_range: int = 0

    @property
    def shape(self):
        return self.y.shape


def score_from_probs(pos: float, neu: float, neg: float) -> float:
    """Collapse class probabilities to the score pos - neg, clamped to
    [-1, 1]. Probabilities must be in (0, 1) and sum to 1 within 0.02."""

    for p in (pos, neu, neg):
        if not 0.0 < p < 1.0:
            raise ValueError(f"probability out of (0, 1): {p}")
    total = pos + neu + neg
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"probabilities sum to {total}, expected 1 within {PROB_SUM_TOL}")
    return min(1.0, max(-1.0, pos - neg))


def threshold_relevance(records, tau: float = DEFAULT_TAU):
    """Zero out relevance entries strictly below tau and drop records whose
    vector becomes all-zero. Order is preserved; idempotent for fixed tau."""

    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    out = []
    for rec in records:
        rel = tuple(0.0 if c < tau else c for c in rec.relevance)
        if any(c > 0.0 for c in rel):
            out.append(replace(rec, relevance=rel))
    return out


def assign_window(published_at, cfg: WindowingConfig):
    """1-based window index of a publication time, or None when it falls
    before the first or after the last window. Calendar-date flooring in
    UTC decides boundary cases."""

    d = published_at.date() if isinstance(published_at, datetime) else published_at
    days = (d - cfg.window_start_date).days
    t = days // cfg.window_length_days + 1
    if 1 <= t <= cfg.window_count:
        return t
    return None


def aggregate(records, cfg: WindowingConfig, categories) -> SentimentPanel:
    """Weighted per-window aggregation: y_tj = sum(C_ij * S_i) / sum(C_ij)
    over window t's records (NaN when no weight), n_tj = sum(C_ij).

    Records are expected to be thresholded already. Out-of-range records
    are counted, not silently dropped.
    """

    categories = list(categories)
    J = len(categories)
    N = cfg.window_count
    num = np.zeros((N, J))
    den = np.zeros((N, J))
    retained = 0
    out_of_range = 0
    for rec in records:
        if len(rec.relevance) != J:
            raise ValueError(
                f"record {rec.id}: relevance length {len(rec.relevance)} != {J} categories"
            )
        t = assign_window(rec.published_at, cfg)
        if t is None:
            out_of_range += 1
            continue
        retained += 1
        row = t - 1
        for j, c in enumerate(rec.relevance):
            if c > 0.0:
                num[row, j] += c * rec.sentiment
                den[row, j] += c
    with np.errstate(invalid="ignore"):
        y = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    # convex combination of scores in [-1, 1]; clip float residue only
    y = np.clip(y, -1.0, 1.0)
    y[den == 0] = np.nan
    if out_of_range:
        logger.info("aggregate: %d records outside the configured windows", out_of_range)
    return SentimentPanel(
        y=y,
        n=den,
        categories=categories,
        window_starts=cfg.window_starts(),
        article_count=retained,
        out_of_range=out_of_range,
    )


def filter_categories(
    panel: SentimentPanel, max_empty_fraction: float = DEFAULT_MAX_EMPTY_FRACTION
) -> SentimentPanel:
    """Drop categories whose fraction of zero-weight windows exceeds the
    cutoff. Fails if nothing survives."""

    if not 0.0 <= max_empty_fraction <= 1.0:
        raise ValueError("max_empty_fraction must lie in [0, 1]")
    N = panel.n.shape[0]
    empty_frac = (panel.n == 0).sum(axis=0) / N
    keep = empty_frac <= max_empty_fraction
    dropped = [c for c, k in zip(panel.categories, keep) if not k]
    if not keep.any():
        raise ValueError("all categories exceed the empty-window cutoff")
    if dropped:
        logger.info("filter_categories: dropped %s", ", ".join(dropped))
    return SentimentPanel(
        y=panel.y[:, keep],
        n=panel.n[:, keep],
        categories=[c for c, k in zip(panel.categories, keep) if k],
        window_starts=list(panel.window_starts),
        article_count=panel.article_count,
        out_of_range=panel.out_of_range,
    )


def panel_summary(panel: SentimentPanel) -> dict:
    """Descriptive statistics: retained article count, mean articles per
    window, per-category weight quantiles, zero-weight cell count."""

    if panel.y.size == 0:
        raise ValueError("empty panel")
    N = panel.n.shape[0]
    per_cat = {}
    for j, cat in enumerate(panel.categories):
        col = panel.n[:, j]
        per_cat[cat] = {
            "n_q25": float(np.quantile(col, 0.25)),
            "n_median": float(np.quantile(col, 0.5)),
            "n_q75": float(np.quantile(col, 0.75)),
            "empty_windows": int((col == 0).sum()),
        }
    return {
        "articles": panel.article_count,
        "articles_per_window": panel.article_count / N,
        "windows": N,
        "categories": list(panel.categories),
        "zero_weight_cells": int((panel.n == 0).sum()),
        "out_of_range": panel.out_of_range,
        "per_category": per_cat,
    }
