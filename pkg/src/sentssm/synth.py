"""Synthetic panels and article streams drawn from the model's own
generative process, with known ground truth for recovery and calibration
tests."""

from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
import math

import numpy as np

from .panel import ArticleRecord, SentimentPanel, WindowingConfig

WEIGHT_LAWS = ("constant", "seasonal", "lognormal")


@dataclass(frozen=True)
class SynthConfig:
    """Ground-truth parameters (per-category vectors) plus the weight law
    that generates n_tj."""

    theta: tuple
    mu: tuple
    sigma_eta: tuple
    sigma: tuple
    n_windows: int
    weight_law: str = "lognormal"
    weight_mean: float = 15.0
    weight_cv: float = 0.8
    weight_amplitude: float = 0.5  # seasonal only; must stay below 1
    weight_period: int = 52
    heteroscedastic: bool = True
    emit_articles: bool = False
    categories: tuple = ()
    window_start: date = date(2023, 12, 31)
    window_length_days: int = 7

    def __post_init__(self):
        J = len(self.theta)
        if not (len(self.mu) == len(self.sigma_eta) == len(self.sigma) == J):
            raise ValueError("parameter vectors must share one length")
        if J == 0 or self.n_windows < 2:
            raise ValueError("need at least one category and two windows")
        for s in tuple(self.sigma_eta) + tuple(self.sigma):
            if not s > 0:
                raise ValueError("scales must be positive")
        for th in self.theta:
            if not 0.0 <= th <= 1.0:
                raise ValueError("theta must lie in [0, 1]")
        if self.weight_law not in WEIGHT_LAWS:
            raise ValueError(f"weight_law must be one of {WEIGHT_LAWS}")
        if not self.weight_mean > 0:
            raise ValueError("weight_mean must be positive")
        if self.weight_law == "seasonal" and not 0.0 <= self.weight_amplitude < 1.0:
            raise ValueError("weight_amplitude must lie in [0, 1)")
        if self.categories and len(self.categories) != J:
            raise ValueError("categories must match parameter vectors in length")

    @property
    def n_categories(self):
        return len(self.theta)

    def category_labels(self):
        if self.categories:
            return list(self.categories)
        return [f"cat{j + 1}" for j in range(self.n_categories)]

    def windowing(self) -> WindowingConfig:
        return WindowingConfig(
            window_start_date=self.window_start,
            window_count=self.n_windows,
            window_length_days=self.window_length_days,
        )


def default_recovery_config(**overrides) -> SynthConfig:
    """Recovery fixture at plausible news-panel magnitudes: six categories,
    two years of weeks, persistent latent paths, lognormal weekly weights."""

    J = 6
    base = dict(
        theta=(0.85,) * J,
        mu=tuple(np.linspace(-0.3, 0.3, J)),
        sigma_eta=(0.05,) * J,
        sigma=tuple(np.linspace(0.10, 0.30, J)),
        n_windows=104,
        weight_law="lognormal",
        weight_mean=15.0,
        weight_cv=0.8,
    )
    base.update(overrides)
    return SynthConfig(**base)


def _draw_weights(cfg: SynthConfig, rng) -> np.ndarray:
    N, J = cfg.n_windows, cfg.n_categories
    if cfg.weight_law == "constant":
        return np.full((N, J), cfg.weight_mean)
    if cfg.weight_law == "seasonal":
        t = np.arange(1, N + 1)[:, None]
        return cfg.weight_mean * (
            1.0 + cfg.weight_amplitude * np.sin(2.0 * np.pi * t / cfg.weight_period)
        ) * np.ones((1, J))
    # lognormal with the requested mean and coefficient of variation
    s2 = math.log(1.0 + cfg.weight_cv**2)
    mu_ln = math.log(cfg.weight_mean) - s2 / 2.0
    return rng.lognormal(mean=mu_ln, sigma=math.sqrt(s2), size=(N, J))


def generate_panel(cfg: SynthConfig, rng):
    """Simulate latent paths and observations; returns (panel, x) where x is
    the (N, J) ground-truth state matrix. Note the simulated y is Gaussian
    and is not clipped, so it can stray outside [-1, 1] in extreme draws."""

    N, J = cfg.n_windows, cfg.n_categories
    theta = np.asarray(cfg.theta, dtype=float)
    mu = np.asarray(cfg.mu, dtype=float)
    sig_eta = np.asarray(cfg.sigma_eta, dtype=float)
    sig = np.asarray(cfg.sigma, dtype=float)

    n = _draw_weights(cfg, rng)
    x = np.empty((N, J))
    innov = rng.standard_normal((N, J))
    x[0] = mu + sig_eta * innov[0]
    for t in range(1, N):
        x[t] = (1.0 - theta) * mu + theta * x[t - 1] + sig_eta * innov[t]
    obs_noise = rng.standard_normal((N, J))
    if cfg.heteroscedastic:
        y = x + (sig / np.sqrt(n)) * obs_noise
    else:
        y = x + sig * obs_noise
    panel = SentimentPanel(
        y=y,
        n=n.copy(),
        categories=cfg.category_labels(),
        window_starts=cfg.windowing().window_starts(),
    )
    return panel, x


def all_missing_panel(n_categories: int, n_windows: int) -> SentimentPanel:
    """Panel with every cell unobserved; fitting it exposes the prior."""

    y = np.full((n_windows, n_categories), np.nan)
    n = np.zeros((n_windows, n_categories))
    cfg = WindowingConfig(
        window_start_date=date(2023, 12, 31), window_count=n_windows
    )
    return SentimentPanel(
        y=y,
        n=n,
        categories=[f"cat{j + 1}" for j in range(n_categories)],
        window_starts=cfg.window_starts(),
    )


def generate_articles(cfg: SynthConfig, rng=None, panel=None):
    """Emit an article stream whose thresholded weighted aggregate returns
    the given panel exactly: each observed cell becomes k equally weighted
    single-category articles whose scores average to y_tj and whose weights
    sum to n_tj.

    When panel is omitted it is drawn here (rng required). Cells with
    n_tj below the relevance threshold cannot survive re-thresholding and
    are skipped; the lognormal default never produces them in practice.
    """

    if panel is None:
        if rng is None:
            raise ValueError("generate_articles needs an rng when no panel is given")
        panel, _ = generate_panel(cfg, rng)
    sig = np.asarray(cfg.sigma, dtype=float)
    n_mat = panel.n
    y_mat = panel.y
    starts = panel.window_starts
    records = []
    for t in range(n_mat.shape[0]):
        for j in range(n_mat.shape[1]):
            n = float(n_mat[t, j])
            if n <= 0 or np.isnan(y_mat[t, j]):
                continue
            y = min(1.0, max(-1.0, float(y_mat[t, j])))
            if n <= 1.0:
                k = 1
            else:
                k = 2 * math.ceil(n / 2.0)  # even count so +/- offsets cancel
            c = n / k
            # per-article dispersion consistent with obs variance sigma^2/n
            d = 0.0 if k == 1 else min(sig[j] / math.sqrt(c), 1.0 - abs(y))
            rel = [0.0] * n_mat.shape[1]
            rel[j] = c
            for i in range(k):
                s = y + d if i < k // 2 else y - d
                ts = _publish_time(starts[t], i, cfg.window_length_days)
                records.append(
                    ArticleRecord(
                        id=f"{panel.categories[j]}-w{t + 1:03d}-{i:03d}",
                        published_at=ts,
                        sentiment=s,
                        relevance=tuple(rel),
                    )
                )
    return records


def _publish_time(window_start: date, i: int, window_length_days: int):
    day = window_start + timedelta(days=i % window_length_days)
    return datetime(day.year, day.month, day.day, 12, 0, tzinfo=timezone.utc)
