"""File formats: article readers (CSV / JSON-Lines), panel CSV, the draws
store (long CSV plus a compact binary layout), reports, and run manifests.

All numeric CSV output uses 17-significant-digit formatting so values
round-trip exactly. Timestamps appear only in manifest.json, keeping every
other artifact byte-identical across reruns with the same seed.
"""

from dataclasses import asdict
from datetime import date, datetime, timezone
import csv
import hashlib
import json
import os

import numpy as np

from . import __version__
from .mcmc import PosteriorDraws, RunConfig
from .panel import ArticleRecord, SentimentPanel, score_from_probs

MAGIC = b"SSMDRAWS"
BINARY_VERSION = 1
_LATENT_NONE, _LATENT_FULL, _LATENT_SUMMARY = 0, 1, 2


def fmt(v: float) -> str:
    return f"{float(v):.17g}"


def parse_timestamp(raw: str) -> datetime:
    s = raw.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(s)
    except ValueError:
        raise ValueError(f"malformed timestamp: {raw!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


# ---------------------------------------------------------------- articles

def _record_from_mapping(row, categories, line_no):
    try:
        if row.get("sentiment") not in (None, ""):
            s = float(row["sentiment"])
        else:
            s = score_from_probs(float(row["pos"]), float(row["neu"]), float(row["neg"]))
        rel = tuple(float(row[f"c_{c}"]) for c in categories)
        return ArticleRecord(
            id=str(row["id"]),
            published_at=parse_timestamp(str(row["published_at"])),
            sentiment=s,
            relevance=rel,
        )
    except (KeyError, ValueError, TypeError) as e:
        raise ValueError(f"bad article record at line {line_no}: {e}") from e


def _categories_from_fields(fields):
    return [f[2:] for f in fields if f.startswith("c_")]


def read_articles(path, categories=None):
    """Parse article records; returns (records, categories). Category order
    comes from the given list or, failing that, the c_<name> field order of
    the file."""

    with open(path, newline="", encoding="utf-8") as fh:
        head = fh.read(4096)
        fh.seek(0)
        if head.lstrip()[:1] == "{":
            rows = []
            fields = None
            for i, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                if fields is None:
                    fields = list(obj.keys())
                rows.append((obj, i))
        else:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            rows = [(row, i) for i, row in enumerate(reader, start=2)]
    if categories is None:
        categories = _categories_from_fields(fields or [])
    if not categories:
        raise ValueError(f"{path}: no c_<category> columns found and none configured")
    records = [_record_from_mapping(row, categories, ln) for row, ln in rows]
    return records, list(categories)


def write_articles_csv(records, categories, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "published_at", "sentiment"] + [f"c_{c}" for c in categories])
        for r in records:
            w.writerow(
                [r.id, r.published_at.isoformat(), fmt(r.sentiment)]
                + [fmt(c) for c in r.relevance]
            )


# ------------------------------------------------------------------- panel

def write_panel_csv(panel: SentimentPanel, path) -> None:
    """Long format: window_start, category, y, n. Unobserved y is an empty
    field."""

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["window_start", "category", "y", "n"])
        for t, start in enumerate(panel.window_starts):
            for j, cat in enumerate(panel.categories):
                y = panel.y[t, j]
                w.writerow(
                    [start.isoformat(), cat, "" if np.isnan(y) else fmt(y), fmt(panel.n[t, j])]
                )


def read_panel_csv(path) -> SentimentPanel:
    starts = []
    cats = []
    cells = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            d = date.fromisoformat(row["window_start"])
            c = row["category"]
            if d not in starts:
                starts.append(d)
            if c not in cats:
                cats.append(c)
            y = float("nan") if row["y"] == "" else float(row["y"])
            cells[(d, c)] = (y, float(row["n"]))
    if not cells:
        raise ValueError(f"{path}: empty panel file")
    y = np.full((len(starts), len(cats)), np.nan)
    n = np.zeros((len(starts), len(cats)))
    for (d, c), (yv, nv) in cells.items():
        y[starts.index(d), cats.index(c)] = yv
        n[starts.index(d), cats.index(c)] = nv
    return SentimentPanel(y=y, n=n, categories=cats, window_starts=starts)


# ------------------------------------------------------------------ draws

def write_draws(draws: PosteriorDraws, out_dir) -> None:
    """Persist retained draws: params as long CSV (chain, draw, name,
    value), everything (params + latent) in one binary store with a JSON
    sidecar describing dimensions and run metadata."""

    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "draws.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["chain", "draw", "name", "value"])
        C, D, P = draws.params.shape
        for c in range(C):
            for d in range(D):
                row = draws.params[c, d]
                for p, name in enumerate(draws.param_names):
                    w.writerow([c, d, name, fmt(row[p])])

    if draws.latent is not None:
        kind = _LATENT_FULL
        N, J = draws.latent.shape[2], draws.latent.shape[3]
        summary_keys = []
    elif draws.latent_summary:
        kind = _LATENT_SUMMARY
        summary_keys = sorted(draws.latent_summary)
        N, J = draws.latent_summary[summary_keys[0]].shape
    else:
        kind = _LATENT_NONE
        summary_keys = []
        N = J = 0
    C, D, P = draws.params.shape
    with open(os.path.join(out_dir, "draws.bin"), "wb") as fh:
        fh.write(MAGIC)
        header = np.array([BINARY_VERSION, C, D, P, N, J, kind, len(summary_keys)],
                          dtype="<u4")
        fh.write(header.tobytes())
        fh.write(draws.params.astype("<f8").tobytes())
        if kind == _LATENT_FULL:
            fh.write(draws.latent.astype("<f8").tobytes())
        elif kind == _LATENT_SUMMARY:
            for k in summary_keys:
                fh.write(draws.latent_summary[k].astype("<f8").tobytes())

    meta = {
        "param_names": list(draws.param_names),
        "categories": list(draws.categories),
        "window_starts": [d.isoformat() for d in draws.window_starts],
        "variant": draws.variant,
        "config": asdict(draws.config),
        "chain_info": draws.chain_info,
        "summary_keys": summary_keys,
    }
    with open(os.path.join(out_dir, "draws_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_draws(out_dir) -> PosteriorDraws:
    with open(os.path.join(out_dir, "draws_meta.json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    with open(os.path.join(out_dir, "draws.bin"), "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"not a draws store (magic {magic!r})")
        header = np.frombuffer(fh.read(8 * 4), dtype="<u4")
        version, C, D, P, N, J, kind, n_summary = (int(v) for v in header)
        if version != BINARY_VERSION:
            raise ValueError(f"unsupported draws version {version}")
        params = np.frombuffer(fh.read(C * D * P * 8), dtype="<f8").reshape(C, D, P).copy()
        latent = None
        latent_summary = None
        if kind == _LATENT_FULL:
            latent = np.frombuffer(fh.read(C * D * N * J * 8), dtype="<f8")
            latent = latent.reshape(C, D, N, J).copy()
        elif kind == _LATENT_SUMMARY:
            latent_summary = {}
            for k in meta["summary_keys"]:
                block = np.frombuffer(fh.read(N * J * 8), dtype="<f8")
                latent_summary[k] = block.reshape(N, J).copy()
    return PosteriorDraws(
        param_names=meta["param_names"],
        params=params,
        categories=meta["categories"],
        window_starts=[date.fromisoformat(s) for s in meta["window_starts"]],
        variant=meta["variant"],
        config=RunConfig(**meta["config"]),
        latent=latent,
        latent_summary=latent_summary,
        chain_info=meta["chain_info"],
    )


# ----------------------------------------------------------------- reports

def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_ppc_csv(report, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["category", "cov80", "cov95", "p_mean", "p_out"])
        for row in report.rows():
            w.writerow(
                [row["category"], fmt(row["cov80"]), fmt(row["cov95"]),
                 fmt(row["p_mean"]), fmt(row["p_out"])]
            )


def write_regression_csv(result, path) -> None:
    """The four displayed terms, one row each, in the published table's
    column order."""

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["term", "estimate", "std_error", "t_value", "p_value"])
        for row in result.displayed():
            w.writerow(
                [row["term"], fmt(row["estimate"]), fmt(row["std_error"]),
                 fmt(row["t_value"]), fmt(row["p_value"])]
            )


# ---------------------------------------------------------------- manifest

def config_hash(obj) -> str:
    """sha256 over the canonical JSON form of any JSON-serializable
    configuration object."""

    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def manifest_record(seed, config_obj, extra=None) -> dict:
    manifest = {
        "seed": seed,
        "config_sha256": config_hash(config_obj),
        "version": __version__,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    return manifest


def write_manifest(out_dir, seed, config_obj, extra=None) -> None:
    """Sidecar recording seed, config hash, package version, and creation
    time. The timestamp lives only here so other artifacts stay
    reproducible byte for byte."""

    write_json(manifest_record(seed, config_obj, extra), os.path.join(out_dir, "manifest.json"))
