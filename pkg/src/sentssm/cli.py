"""Command-line pipeline: aggregate, simulate, fit, diagnose, ppc,
validate, export-plots.

Exit codes: 0 success, 1 stage failure, 2 config/input error. Failures
print a machine-readable JSON object to stderr. Every output location gets
a manifest sidecar carrying the seed and a hash of the effective config;
the manifest is the only artifact containing a timestamp.
"""

from dataclasses import asdict, dataclass, field
from datetime import date
import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__, io
from .diagnostics import diagnose, export_traces
from .mcmc import RunConfig, full_scale_config, run_chains
from .model import ModelSpec, VARIANTS
from .panel import (
    DEFAULT_MAX_EMPTY_FRACTION,
    DEFAULT_TAU,
    WindowingConfig,
    aggregate,
    filter_categories,
    panel_summary,
    threshold_relevance,
)
from .ppc import ppc_summary, replicate
from .synth import SynthConfig, default_recovery_config, generate_articles, generate_panel
from .widthreg import fit_width_regression, interval_widths, marginal_effects


class InputError(Exception):
    """Configuration or input problem: maps to exit code 2."""


def _load_json(path):
    if not os.path.exists(path):
        raise InputError(f"missing input file: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise InputError(f"invalid JSON in {path}: {e}") from e


def _require_file(path):
    if not os.path.exists(path):
        raise InputError(f"missing input file: {path}")
    return path


def _ensure_dir(path):
    if os.path.exists(path) and not os.path.isdir(path):
        raise InputError(f"output path exists and is not a directory: {path}")
    os.makedirs(path, exist_ok=True)
    return path


def _out_file(path):
    # empty basename means a trailing slash, i.e. a directory spelling
    if os.path.isdir(path) or not os.path.basename(path):
        raise InputError(f"output path is a directory, expected a file: {path}")
    parent = os.path.dirname(path)
    if parent:
        try:
            os.makedirs(parent, exist_ok=True)
        except (FileExistsError, NotADirectoryError) as e:
            raise InputError(f"cannot create parent directory for {path}: {e}") from e
    return path


def _sidecar_manifest(out_path, seed, config_obj, extra=None):
    """manifest.json inside a directory output, <name>.manifest.json next
    to a file output."""

    if os.path.isdir(out_path):
        io.write_manifest(out_path, seed, config_obj, extra)
    else:
        io.write_json(io.manifest_record(seed, config_obj, extra),
                      out_path + ".manifest.json")


def _require_draws_dir(path):
    if not os.path.exists(os.path.join(path, "draws_meta.json")):
        raise InputError(f"not a draws store (no draws_meta.json): {path}")
    return path


# ------------------------------------------------------------- subcommands

def cmd_aggregate(args) -> int:
    cfg = _load_json(_require_file(args.config))
    try:
        windowing = WindowingConfig(
            window_start_date=date.fromisoformat(cfg["window_start"]),
            window_count=int(cfg["window_count"]),
            window_length_days=int(cfg.get("window_length_days", 7)),
        )
    except (KeyError, ValueError) as e:
        raise InputError(f"bad windowing config: {e}") from e
    tau = float(cfg.get("tau", DEFAULT_TAU))
    max_empty = float(cfg.get("max_empty_fraction", DEFAULT_MAX_EMPTY_FRACTION))
    records, categories = io.read_articles(
        _require_file(args.input), cfg.get("categories")
    )
    records = threshold_relevance(records, tau)
    panel = aggregate(records, windowing, categories)
    panel = filter_categories(panel, max_empty)
    out = _ensure_dir(args.out)
    io.write_panel_csv(panel, os.path.join(out, "panel.csv"))
    io.write_json(panel_summary(panel), os.path.join(out, "summary.json"))
    io.write_manifest(out, None, cfg, {"stage": "aggregate"})
    return 0


def _synth_config_from_json(cfg: dict) -> SynthConfig:
    if cfg.get("default"):
        overrides = {k: v for k, v in cfg.items() if k != "default"}
        for key in ("theta", "mu", "sigma_eta", "sigma", "categories"):
            if key in overrides:
                overrides[key] = tuple(overrides[key])
        return default_recovery_config(**overrides)
    try:
        kwargs = dict(cfg)
        for key in ("theta", "mu", "sigma_eta", "sigma", "categories"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if "window_start" in kwargs:
            kwargs["window_start"] = date.fromisoformat(kwargs["window_start"])
        return SynthConfig(**kwargs)
    except (TypeError, ValueError) as e:
        raise InputError(f"bad simulate config: {e}") from e


def cmd_simulate(args) -> int:
    cfg = _load_json(_require_file(args.config)) if args.config else {"default": True}
    scfg = _synth_config_from_json(cfg)
    rng = np.random.default_rng(args.seed)
    out = _ensure_dir(args.out)
    panel, x = generate_panel(scfg, rng)
    io.write_panel_csv(panel, os.path.join(out, "panel.csv"))
    with open(os.path.join(out, "truth.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["window_start", "category", "x_true"])
        for t, start in enumerate(panel.window_starts):
            for j, cat in enumerate(panel.categories):
                w.writerow([start.isoformat(), cat, io.fmt(x[t, j])])
    if scfg.emit_articles or args.articles:
        records = generate_articles(scfg, panel=panel)
        io.write_articles_csv(records, panel.categories, os.path.join(out, "articles.csv"))
    io.write_manifest(out, args.seed, cfg, {"stage": "simulate"})
    return 0


def _run_config(args) -> RunConfig:
    if args.full_scale:
        return full_scale_config(
            chains=args.chains, base_seed=args.seed,
            store_latent=not args.no_latent, workers=args.workers,
        )
    return RunConfig(
        chains=args.chains, iterations=args.iters, burn_in=args.burnin,
        thin=args.thin, base_seed=args.seed,
        store_latent=not args.no_latent, workers=args.workers,
    )


def cmd_fit(args) -> int:
    panel = io.read_panel_csv(_require_file(args.panel))
    try:
        spec = ModelSpec(variant=args.variant)
        cfg = _run_config(args)
    except ValueError as e:
        raise InputError(str(e)) from e
    draws = run_chains(panel, spec, cfg)
    out = _ensure_dir(args.out)
    io.write_draws(draws, out)
    io.write_manifest(
        out, args.seed, {"variant": args.variant, "run": asdict(cfg)}, {"stage": "fit"}
    )
    return 0


def cmd_diagnose(args) -> int:
    draws = io.read_draws(_require_draws_dir(args.draws))
    report = diagnose(draws, threshold=args.threshold)
    io.write_json(report.to_dict(), _out_file(args.out))
    if args.trace_out:
        names = args.trace_names.split(",") if args.trace_names else draws.names()[:4]
        try:
            export_traces(draws, names, _out_file(args.trace_out))
        except KeyError as e:
            raise InputError(f"unknown trace name: {e}") from e
    _sidecar_manifest(args.out, draws.config.base_seed,
                      {"draws": args.draws, "threshold": args.threshold},
                      {"stage": "diagnose"})
    return 0


def cmd_ppc(args) -> int:
    draws = io.read_draws(_require_draws_dir(args.draws))
    panel = io.read_panel_csv(_require_file(args.panel))
    spec = ModelSpec(variant=draws.variant)
    rng = np.random.default_rng(args.seed)
    y_rep = replicate(draws, panel, spec, rng)
    report = ppc_summary(y_rep, panel)
    io.write_ppc_csv(report, _out_file(args.out))
    _sidecar_manifest(args.out, args.seed,
                      {"draws": args.draws, "panel": args.panel},
                      {"stage": "ppc"})
    return 0


def cmd_validate(args) -> int:
    panel = io.read_panel_csv(_require_file(args.panel))
    hetero = io.read_draws(_require_draws_dir(args.draws_hetero))
    homo = io.read_draws(_require_draws_dir(args.draws_homo))
    if homo.variant != "homoscedastic":
        raise InputError(f"--draws-homo has variant {homo.variant!r}, expected homoscedastic")
    if hetero.variant == "homoscedastic":
        raise InputError("--draws-hetero points at a homoscedastic fit")
    records = interval_widths(hetero, panel) + interval_widths(homo, panel)
    result = fit_width_regression(records)
    io.write_regression_csv(result, _out_file(args.out))
    het_slope, homo_slope = marginal_effects(result)
    detail = {
        "terms": result.terms,
        "estimates": result.estimates,
        "std_errors": result.std_errors,
        "t_values": result.t_values,
        "p_values": result.p_values,
        "n_obs": result.n_obs,
        "r2": result.r2,
        "adj_r2": result.adj_r2,
        "marginal_effect_hetero": het_slope,
        "marginal_effect_homo": homo_slope,
    }
    io.write_json(detail, os.path.splitext(args.out)[0] + ".json")
    _sidecar_manifest(args.out, None,
                      {"draws_hetero": args.draws_hetero, "draws_homo": args.draws_homo},
                      {"stage": "validate"})
    return 0


def export_plot_data(draws, panel, out_dir) -> list:
    """Per-category CSVs with the observed series and the posterior median
    and 90% band of the latent path; enough to redraw the headline
    figures."""

    q05 = draws.latent_quantile(0.05)
    q50 = draws.latent_quantile(0.5)
    q95 = draws.latent_quantile(0.95)
    paths = []
    _ensure_dir(out_dir)
    for j, cat in enumerate(panel.categories):
        path = os.path.join(out_dir, f"plot_{cat}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["window_start", "y_obs", "n", "x_median", "x_q05", "x_q95"])
            for t, start in enumerate(panel.window_starts):
                y = panel.y[t, j]
                w.writerow([
                    start.isoformat(),
                    "" if np.isnan(y) else io.fmt(y),
                    io.fmt(panel.n[t, j]),
                    io.fmt(q50[t, j]), io.fmt(q05[t, j]), io.fmt(q95[t, j]),
                ])
        paths.append(path)
    return paths


def cmd_export_plots(args) -> int:
    draws = io.read_draws(_require_draws_dir(args.draws))
    panel = io.read_panel_csv(_require_file(args.panel))
    export_plot_data(draws, panel, args.out)
    io.write_manifest(args.out, draws.config.base_seed,
                      {"draws": args.draws, "panel": args.panel},
                      {"stage": "export-plots"})
    return 0


# ---------------------------------------------------------------- pipeline

@dataclass
class PipelineConfig:
    """End-to-end run: synthetic input (or an existing panel CSV), the
    variants to fit, and one RunConfig shared by all fits."""

    out_dir: str
    synth: SynthConfig = None
    panel_path: str = None
    seed: int = 0
    variants: tuple = ("hierarchical", "homoscedastic")
    run: RunConfig = field(default_factory=RunConfig)
    ppc_seed: int = 1234

    def __post_init__(self):
        if (self.synth is None) == (self.panel_path is None):
            raise ValueError("provide exactly one of synth or panel_path")
        for v in self.variants:
            if v not in VARIANTS:
                raise ValueError(f"unknown variant {v!r}")


def run_pipeline(cfg: PipelineConfig) -> dict:
    """simulate/ingest -> fit each variant -> diagnose -> ppc -> validate
    -> plot export. Returns a summary of artifact paths and headline
    numbers; raises on any stage failure."""

    out = _ensure_dir(cfg.out_dir)
    if cfg.synth is not None:
        rng = np.random.default_rng(cfg.seed)
        panel, _ = generate_panel(cfg.synth, rng)
        panel_path = os.path.join(out, "panel.csv")
        io.write_panel_csv(panel, panel_path)
    else:
        panel_path = _require_file(cfg.panel_path)
        panel = io.read_panel_csv(panel_path)
    summary = {"out_dir": out, "variants": {}, "panel": panel_path}
    fits = {}
    for variant in cfg.variants:
        spec = ModelSpec(variant=variant)
        draws = run_chains(panel, spec, cfg.run)
        ddir = _ensure_dir(os.path.join(out, f"draws_{variant}"))
        io.write_draws(draws, ddir)
        io.write_manifest(ddir, cfg.run.base_seed,
                          {"variant": variant, "run": asdict(cfg.run)}, {"stage": "fit"})
        report = diagnose(draws)
        io.write_json(report.to_dict(), os.path.join(out, f"diagnostics_{variant}.json"))
        fits[variant] = draws
        summary["variants"][variant] = {
            "draws": ddir,
            "max_rhat": report.max_rhat,
            "flagged": report.flagged,
        }
    first = cfg.variants[0]
    rng = np.random.default_rng(cfg.ppc_seed)
    y_rep = replicate(fits[first], panel, ModelSpec(variant=first), rng)
    ppc_report = ppc_summary(y_rep, panel)
    io.write_ppc_csv(ppc_report, os.path.join(out, f"ppc_{first}.csv"))
    summary["ppc"] = os.path.join(out, f"ppc_{first}.csv")

    hetero = [v for v in cfg.variants if v != "homoscedastic"]
    if hetero and "homoscedastic" in cfg.variants:
        records = interval_widths(fits[hetero[0]], panel) + interval_widths(
            fits["homoscedastic"], panel
        )
        result = fit_width_regression(records)
        io.write_regression_csv(result, os.path.join(out, "table1.csv"))
        het_slope, homo_slope = marginal_effects(result)
        io.write_json(
            {
                "estimates": result.estimates,
                "p_values": result.p_values,
                "n_obs": result.n_obs,
                "adj_r2": result.adj_r2,
                "marginal_effect_hetero": het_slope,
                "marginal_effect_homo": homo_slope,
            },
            os.path.join(out, "validation.json"),
        )
        summary["validation"] = os.path.join(out, "table1.csv")
    export_plot_data(fits[first], panel, os.path.join(out, "plots"))
    io.write_manifest(out, cfg.seed, _pipeline_config_json(cfg), {"stage": "pipeline"})
    return summary


def _pipeline_config_json(cfg: PipelineConfig) -> dict:
    blob = {
        "seed": cfg.seed,
        "variants": list(cfg.variants),
        "run": asdict(cfg.run),
        "ppc_seed": cfg.ppc_seed,
    }
    if cfg.synth is not None:
        blob["synth"] = {k: (list(v) if isinstance(v, tuple) else v)
                         for k, v in asdict(cfg.synth).items()}
    else:
        blob["panel_path"] = cfg.panel_path
    return blob


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sentssm",
        description="Weekly sentiment panels and the state-space model over them",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("aggregate", help="articles -> weekly panel CSV")
    pa.add_argument("--input", required=True)
    pa.add_argument("--config", required=True)
    pa.add_argument("--out", required=True)
    pa.set_defaults(func=cmd_aggregate)

    ps = sub.add_parser("simulate", help="synthetic panel (+articles) with known truth")
    ps.add_argument("--config")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)
    ps.add_argument("--articles", action="store_true",
                    help="also emit an article stream that aggregates back to the panel")
    ps.set_defaults(func=cmd_simulate)

    pf = sub.add_parser("fit", help="run the MCMC sampler on a panel CSV")
    pf.add_argument("--panel", required=True)
    pf.add_argument("--variant", default="hierarchical", choices=list(VARIANTS))
    pf.add_argument("--chains", type=int, default=3)
    pf.add_argument("--iters", type=int, default=20_000)
    pf.add_argument("--burnin", type=int, default=5_000)
    pf.add_argument("--thin", type=int, default=5)
    pf.add_argument("--seed", type=int, default=42)
    pf.add_argument("--workers", type=int, default=1)
    pf.add_argument("--full-scale", action="store_true",
                    help="full-scale protocol: 255,000 iterations, burn-in 5,000, thin 25")
    pf.add_argument("--no-latent", action="store_true",
                    help="store latent-path quantile summaries instead of full draws")
    pf.add_argument("--out", required=True)
    pf.set_defaults(func=cmd_fit)

    pd = sub.add_parser("diagnose", help="split R-hat / ESS report on a draws store")
    pd.add_argument("--draws", required=True)
    pd.add_argument("--out", required=True)
    pd.add_argument("--threshold", type=float, default=1.01)
    pd.add_argument("--trace-out")
    pd.add_argument("--trace-names", help="comma-separated parameter names")
    pd.set_defaults(func=cmd_diagnose)

    pp = sub.add_parser("ppc", help="posterior predictive checks")
    pp.add_argument("--draws", required=True)
    pp.add_argument("--panel", required=True)
    pp.add_argument("--seed", type=int, default=1234)
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=cmd_ppc)

    pv = sub.add_parser("validate", help="interval-width regression across variants")
    pv.add_argument("--draws-hetero", required=True)
    pv.add_argument("--draws-homo", required=True)
    pv.add_argument("--panel", required=True)
    pv.add_argument("--out", required=True)
    pv.set_defaults(func=cmd_validate)

    pe = sub.add_parser("export-plots", help="plot-ready per-category CSVs")
    pe.add_argument("--draws", required=True)
    pe.add_argument("--panel", required=True)
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_export_plots)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        json.dump({"error": str(e), "stage": args.command}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except FileNotFoundError as e:
        json.dump({"error": f"missing file: {e.filename}", "stage": args.command}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except Exception as e:  # stage failure
        json.dump({"error": str(e), "stage": args.command}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
