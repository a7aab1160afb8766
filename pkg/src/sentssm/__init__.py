"""Weekly news-sentiment panels smoothed by a hierarchical Bayesian AR(1)
state-space model whose observation noise scales inversely with the
information weight of each window."""

__version__ = "0.1.0"

from .panel import (
    ArticleRecord,
    SentimentPanel,
    WindowingConfig,
    aggregate,
    assign_window,
    filter_categories,
    panel_summary,
    score_from_probs,
    threshold_relevance,
)
from .model import Hyperpriors, ModelSpec, ParamState, VARIANTS
from .kalman import FilterResult, ffbs_sample, kalman_filter, marginal_loglik, rts_smoother
from .mcmc import PosteriorDraws, RunConfig, gibbs_sweep, full_scale_config, run_chain, run_chains
from .diagnostics import DiagnosticsReport, diagnose, effective_sample_size, export_traces, split_rhat
from .ppc import PpcReport, ppc_summary, replicate
from .widthreg import (
    RegressionResult,
    WidthRecord,
    fit_width_regression,
    interval_widths,
    marginal_effects,
)
from .synth import SynthConfig, default_recovery_config, generate_articles, generate_panel

__all__ = [
    "ArticleRecord",
    "SentimentPanel",
    "WindowingConfig",
    "aggregate",
    "assign_window",
    "filter_categories",
    "panel_summary",
    "score_from_probs",
    "threshold_relevance",
    "Hyperpriors",
    "ModelSpec",
    "ParamState",
    "VARIANTS",
    "FilterResult",
    "ffbs_sample",
    "kalman_filter",
    "marginal_loglik",
    "rts_smoother",
    "PosteriorDraws",
    "RunConfig",
    "gibbs_sweep",
    "full_scale_config",
    "run_chain",
    "run_chains",
    "DiagnosticsReport",
    "diagnose",
    "effective_sample_size",
    "export_traces",
    "split_rhat",
    "PpcReport",
    "ppc_summary",
    "replicate",
    "RegressionResult",
    "WidthRecord",
    "fit_width_regression",
    "interval_widths",
    "marginal_effects",
    "SynthConfig",
    "default_recovery_config",
    "generate_articles",
    "generate_panel",
    "__version__",
]
