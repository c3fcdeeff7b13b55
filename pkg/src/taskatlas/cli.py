"""Command-line pipeline runner: configured, reproducible runs over label files.

Config resolution: JSON config file, overridden by flags; the ATLAS_SEED
environment variable overrides the config seed (a --seed flag wins over both).
Every output file carries a header block with the config digest and seed.
Exit codes: 0 success, 1 usage, 2 input error, 3 internal error.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import click
import numpy as np

from . import __version__, aggregate, ingest, linkage, reweight, validate
from .core import DEFINITE_MARGINS, IncomeGroup, Margin
from .ingest import IngestError, LabelDataset
from .linkage import LinkageError, ProviderError
from .reweight import ReweightError
from .stats import (
    StatsError,
    ale_1d,
    bootstrap_band,
    fe_regression,
    fit_forest,
    ForestParams,
    leave_one_out,
    loess,
    mean_abs_shap,
    ols,
    partial_correlation,
    pearson,
    permutation_importance,
    shapley_r2,
    spearman,
    variance_decomposition,
)
from .validate import ValidateError

INPUT_ERRORS = (
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    IngestError,
    LinkageError,
    ProviderError,
    ReweightError,
    ValidateError,
    StatsError,
    aggregate.AggregateError,
    json.JSONDecodeError,
    ValueError,
    KeyError,
)

# environment-specific keys excluded from the config digest: the digest captures
# what was computed (parameters, seed), not where files happened to live
_VOLATILE_KEYS = frozenset(
    {
        "out", "output_dir", "jobs",
        "labels", "dataset", "registry", "benchmark", "run_a", "run_b", "original", "variants",
        "candidates", "tasks", "activities", "graph", "weights", "bridge", "employment",
        "cell_values", "pairs", "lexicon", "table", "matrix",
    }
)


@dataclass
class RunContext:
    config: dict
    seed: int
    digest: str
    jobs: int

    def meta(self) -> dict:
        return {"tool": f"taskatlas {__version__}", "config_digest": self.digest, "seed": self.seed}


def _resolve(config_path: Optional[str], seed_flag: Optional[int], jobs: Optional[int], **overrides) -> RunContext:
    config: dict = {}
    if config_path:
        config = json.loads(_read_text(config_path))
        if not isinstance(config, dict):
            raise IngestError(f"config file {config_path} must hold a JSON object")
    for key, value in overrides.items():
        if value is not None and value != ():
            config[key] = value
    if seed_flag is not None:
        seed = int(seed_flag)
    elif os.environ.get("ATLAS_SEED"):
        seed = int(os.environ["ATLAS_SEED"])
    else:
        seed = int(config.get("seed", 0))
    config["seed"] = seed
    stable = {k: v for k, v in config.items() if k not in _VOLATILE_KEYS}
    digest = hashlib.sha256(json.dumps(stable, sort_keys=True, default=str).encode("utf-8")).hexdigest()[:16]
    return RunContext(config=config, seed=seed, digest=digest, jobs=jobs if jobs else int(config.get("jobs", 1)))


def _read_text(path) -> str:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input file not found: {p}")
    return p.read_text(encoding="utf-8")


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input file not found: {p}")
    return p


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _write_csv(
    path: Path,
    ctx: RunContext,
    fieldnames: Sequence[str],
    rows: Sequence[Mapping[str, Any]],
    extra_meta: Optional[Mapping[str, Any]] = None,
) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    meta = dict(ctx.meta())
    meta.update(extra_meta or {})
    for key, value in meta.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.DictWriter(buf, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in fieldnames})
    path.write_text(buf.getvalue(), encoding="utf-8")


def _write_json(path: Path, ctx: RunContext, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"meta": ctx.meta(), "data": payload}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_dataset(path: Path, ctx: RunContext, dataset: LabelDataset) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {key}: {value}" for key, value in ctx.meta().items()]
    text = "\n".join(lines) + "\n" + dataset.to_jsonl()
    path.write_text(text, encoding="utf-8")


def _load_dataset(path) -> LabelDataset:
    dataset, report = ingest.read_labels(str(_require(path)), fmt="jsonl")
    if report.rows_rejected:
        raise IngestError(f"{path}: {report.rows_rejected} rejected rows in an intermediate dataset")
    return dataset


def _read_table(path) -> list[dict[str, str]]:
    with open(_require(path), "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(ingest._strip_comments(handle))
        if reader.fieldnames is None:
            raise IngestError(f"{path} has no header row")
        return [dict(row) for row in reader]


def _column(rows: Sequence[Mapping[str, str]], name: str) -> np.ndarray:
    try:
        return np.asarray([float(row[name]) for row in rows], dtype=np.float64)
    except KeyError:
        raise IngestError(f"table has no column {name!r}") from None
    except ValueError as exc:
        raise IngestError(f"column {name!r} is not numeric: {exc}") from None


def _series(rows: Sequence[Mapping[str, str]], key_col: str, value_col: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for row in rows:
        if row.get(value_col, "") == "":
            continue
        out[row[key_col]] = float(row[value_col])
    return out


def _embedder(spec: str):
    if spec == "hash":
        return linkage.HashEmbedder()
    if spec.startswith("hash:"):
        return linkage.HashEmbedder(dim=int(spec.split(":", 1)[1]))
    if spec.startswith("replay:"):
        return linkage.ReplayEmbedder(_require(spec.split(":", 1)[1]))
    raise IngestError(f"unknown embedder spec {spec!r} (use hash, hash:<dim>, or replay:<dir>)")


def _voter(spec: str):
    if spec == "hash":
        return linkage.HashVoter()
    if spec.startswith("hash:"):
        return linkage.HashVoter(valid_rate=float(spec.split(":", 1)[1]))
    if spec.startswith("replay:"):
        return linkage.ReplayVoter(_require(spec.split(":", 1)[1]))
    raise IngestError(f"unknown voter spec {spec!r} (use hash, hash:<rate>, or replay:<dir>)")


@click.group()
@click.version_option(version=__version__, prog_name="taskatlas")
def cli() -> None:
    """Task exposure pipeline: ingest, summarize, link, reweight, validate, stats."""


# --- ingest ---------------------------------------------------------------------


@cli.command("ingest")
@click.option("--labels", required=True, help="Label file (JSONL or CSV).")
@click.option("--format", "fmt", default="jsonl", type=click.Choice(["jsonl", "csv"]))
@click.option("--out", required=True, help="Output directory.")
@click.option("--strict", is_flag=True, help="Exit non-zero when any row is rejected.")
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_ingest(labels, fmt, out, strict, config_path, seed):
    """Parse, validate, deduplicate a label file; write the normalized dataset."""
    ctx = _resolve(config_path, seed, None, labels=labels, format=fmt)
    dataset, report = ingest.read_labels(str(_require(labels)), fmt=fmt)
    out_dir = Path(out)
    _write_dataset(out_dir / "dataset.jsonl", ctx, dataset)
    _write_json(out_dir / "parse_report.json", ctx, report.to_dict())
    click.echo(
        f"read {report.rows_read} rows: {report.rows_accepted} accepted, "
        f"{report.rows_rejected} rejected; {len(dataset)} unique (country, task) records"
    )
    if strict and report.rows_rejected:
        raise IngestError(f"--strict: {report.rows_rejected} rows rejected")


# --- summarize -------------------------------------------------------------------

_SUMMARY_FIELDS = (
    ["iso3", "n_tasks", "n_exposed", "n_margin_known_exposed", "n_unclear_exposed", "exposed_share", "high_share"]
    + [f"margin_all_{m.value}" for m in DEFINITE_MARGINS]
    + [f"margin_within_{m.value}" for m in DEFINITE_MARGINS]
    + [f"channel_{c.value}" for c in aggregate.ACTIVE_CHANNELS]
    + ["channel_none_exposed_share", "ai_material_share_exposed"]
    + [f"ai_function_{f.value}" for f in aggregate.ACTIVE_AI_FUNCTIONS]
    + ["polarisation_p", "tilt_t"]
)


def _summary_row(summary: aggregate.CountrySummary) -> dict:
    row: dict[str, Any] = {
        "iso3": summary.iso3,
        "n_tasks": summary.n_tasks,
        "n_exposed": summary.n_exposed,
        "n_margin_known_exposed": summary.n_margin_known_exposed,
        "n_unclear_exposed": summary.n_unclear_exposed,
        "exposed_share": summary.exposed_share,
        "high_share": summary.high_share,
        "channel_none_exposed_share": summary.channel_none_exposed_share,
        "ai_material_share_exposed": summary.ai_material_share_exposed,
    }
    for m in DEFINITE_MARGINS:
        row[f"margin_all_{m.value}"] = summary.margin_shares_all[m]
        row[f"margin_within_{m.value}"] = summary.margin_shares_within[m] if summary.margin_shares_within else None
    for c in aggregate.ACTIVE_CHANNELS:
        row[f"channel_{c.value}"] = summary.channel_shares_exposed[c] if summary.channel_shares_exposed else None
    for f in aggregate.ACTIVE_AI_FUNCTIONS:
        row[f"ai_function_{f.value}"] = summary.ai_function_mix[f] if summary.ai_function_mix else None
    if summary.n_margin_known_exposed > 0:
        pol = aggregate.polarisation(summary)
        row["polarisation_p"] = pol.p
        row["tilt_t"] = pol.tilt
    return row


@cli.command("summarize")
@click.option("--dataset", "dataset_path", required=True)
@click.option("--registry", "registry_path", default=None)
@click.option("--benchmark", "benchmark_path", default=None, help="Benchmark labels for ladder deviations.")
@click.option("--transitions", is_flag=True, help="Emit income-group modal pathway transitions.")
@click.option("--out", required=True)
@click.option("--jobs", type=int, default=None)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_summarize(dataset_path, registry_path, benchmark_path, transitions, out, jobs, config_path, seed):
    """Country and group summary tables (and optional ladder deviations)."""
    ctx = _resolve(config_path, seed, jobs, dataset=dataset_path, registry=registry_path, benchmark=benchmark_path)
    dataset = _load_dataset(dataset_path)
    out_dir = Path(out)
    summaries = aggregate.summarize_all(dataset, jobs=ctx.jobs)
    _write_csv(out_dir / "country_summary.csv", ctx, _SUMMARY_FIELDS, [_summary_row(s) for _, s in sorted(summaries.items())])

    if registry_path:
        registry = ingest.load_country_registry(str(_require(registry_path)))
        registered = [s for s in summaries.values() if s.iso3 in registry]
        for field in ("income_group", "region"):
            groups = aggregate.group_summary(registered, registry, field)
            fieldnames = ["group", "n_countries"] + sorted({name for g in groups.values() for name in g.means})
            rows = [{"group": g.group, "n_countries": g.n_countries, **g.means} for g in groups.values()]
            _write_csv(out_dir / f"group_summary_{field}.csv", ctx, fieldnames, rows)
        if transitions:
            _write_transitions(out_dir / "transitions.csv", ctx, dataset, registry)

    if benchmark_path:
        if not registry_path:
            raise IngestError("--benchmark needs --registry for income-group matching")
        benchmark, report = ingest.read_labels(str(_require(benchmark_path)), fmt="jsonl")
        if report.rows_rejected:
            raise IngestError(f"{benchmark_path}: {report.rows_rejected} rejected rows")
        groups = {iso3: c.income_group for iso3, c in registry.items() if c.income_group is not IncomeGroup.UNCLASSIFIED}
        deviations = aggregate.benchmark_deviation(
            LabelDataset({k: v for k, v in dataset.records.items() if k[0] in groups}, dataset.provenance),
            benchmark,
            groups,
        )
        _write_csv(
            out_dir / "benchmark_deviation.csv",
            ctx,
            ["iso3", "mean_deviation", "n_shared_tasks"],
            [
                {"iso3": d.iso3, "mean_deviation": d.mean_deviation, "n_shared_tasks": d.n_shared_tasks}
                for _, d in sorted(deviations.items())
            ],
        )
    click.echo(f"summarized {len(summaries)} countries -> {out_dir}")


_GROUP_LADDER = (IncomeGroup.LOW, IncomeGroup.LOWER_MIDDLE, IncomeGroup.UPPER_MIDDLE, IncomeGroup.HIGH)


def _write_transitions(path: Path, ctx: RunContext, dataset: LabelDataset, registry) -> None:
    members: dict[IncomeGroup, list[str]] = {g: [] for g in _GROUP_LADDER}
    for iso3 in dataset.countries():
        context = registry.get(iso3)
        if context and context.income_group in members:
            members[context.income_group].append(iso3)
    modal = {
        g: aggregate.modal_pathway_states(dataset, members[g])[0] for g in _GROUP_LADDER if members[g]
    }
    rows = []
    ladder = [g for g in _GROUP_LADDER if g in modal]
    for src, dst in zip(ladder, ladder[1:]):
        common = sorted(set(modal[src]) & set(modal[dst]))
        matrix = aggregate.transition_matrix(
            {t: modal[src][t] for t in common}, {t: modal[dst][t] for t in common}
        )
        for i, s_from in enumerate(matrix.states):
            for j, s_to in enumerate(matrix.states):
                rows.append(
                    {
                        "from_group": src.value,
                        "to_group": dst.value,
                        "source_state": s_from.value,
                        "dest_state": s_to.value,
                        "count": int(matrix.counts[i, j]),
                        "share": float(matrix.shares[i, j]),
                    }
                )
    _write_csv(
        path,
        ctx,
        ["from_group", "to_group", "source_state", "dest_state", "count", "share"],
        rows,
        extra_meta={"modal_tie_rule": "mode per task within group; ties to the smallest state name"},
    )


# --- link -----------------------------------------------------------------------


@cli.group("link")
def cmd_link() -> None:
    """Industry-graph construction and occupation/industry summaries."""


def _load_texts(path, id_col: str) -> dict[str, str]:
    rows = _read_table(path)
    out = {}
    for row in rows:
        if id_col not in row or "text" not in row:
            raise IngestError(f"{path} needs {id_col!r} and 'text' columns")
        out[row[id_col]] = row["text"]
    return out


@cmd_link.command("candidates")
@click.option("--tasks", "tasks_path", required=True, help="CSV with task_id,text.")
@click.option("--activities", "activities_path", required=True, help="CSV with isic4,text.")
@click.option("--embedder", "embedder_spec", default="hash")
@click.option("--top-k", type=int, default=60, show_default=True)
@click.option("--floor", type=float, default=0.30, show_default=True)
@click.option("--out", required=True, help="Output candidates JSONL.")
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_link_candidates(tasks_path, activities_path, embedder_spec, top_k, floor, out, config_path, seed):
    """Embedding-retrieved candidate edges per activity."""
    ctx = _resolve(config_path, seed, None, tasks=tasks_path, activities=activities_path, embedder=embedder_spec, top_k=top_k, floor=floor)
    tasks = _load_texts(tasks_path, "task_id")
    activities = _load_texts(activities_path, "isic4")
    edges = linkage.build_candidates(tasks, activities, _embedder(embedder_spec), top_k=top_k, floor=floor)
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps(
            {"meta": {**ctx.meta(), "top_k": top_k, "floor": floor, "embedder": embedder_spec}},
            sort_keys=True,
            separators=(",", ":"),
        )
    ]
    for edge in edges:
        lines.append(json.dumps({"task_id": edge.task_id, "isic4": edge.isic4, "similarity": edge.similarity}, separators=(",", ":")))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"{len(edges)} candidate edges -> {path}")


@cmd_link.command("prune")
@click.option("--candidates", "candidates_path", required=True)
@click.option("--tasks", "tasks_path", required=True)
@click.option("--activities", "activities_path", required=True)
@click.option("--voter", "voter_spec", default="hash")
@click.option("--votes", "votes_per_edge", type=int, default=3, show_default=True)
@click.option("--out", required=True, help="Output graph JSONL.")
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_link_prune(candidates_path, tasks_path, activities_path, voter_spec, votes_per_edge, out, config_path, seed):
    """Majority-vote pruning of candidate edges into the retained graph."""
    ctx = _resolve(config_path, seed, None, candidates=candidates_path, voter=voter_spec, votes=votes_per_edge)
    lines = _read_text(candidates_path).splitlines()
    candidates = []
    candidate_meta: dict = {}
    for line in lines:
        if not line.strip():
            continue
        obj = json.loads(line)
        if "meta" in obj:
            # carry the retrieval parameters into the graph provenance
            candidate_meta = {
                k: v for k, v in obj["meta"].items() if k in ("top_k", "floor", "embedder")
            }
            continue
        candidates.append(linkage.CandidateEdge(obj["task_id"], obj["isic4"], float(obj["similarity"])))
    tasks = _load_texts(tasks_path, "task_id")
    activities = _load_texts(activities_path, "isic4")
    result = linkage.prune_edges(
        candidates,
        _voter(voter_spec),
        tasks,
        activities,
        votes_per_edge=votes_per_edge,
        provenance={**ctx.meta(), **candidate_meta, "voter": voter_spec},
    )
    linkage.save_graph(result.graph, out)
    click.echo(
        f"retained {result.n_retained} of {result.n_candidates} candidates, "
        f"mean vote agreement {result.mean_agreement:.4f} -> {out}"
    )


@cmd_link.command("apply")
@click.option("--dataset", "dataset_path", required=True)
@click.option("--graph", "graph_path", default=None)
@click.option("--weights", "weights_path", default=None, help="CSV soc,task_id,weight.")
@click.option("--bridge", "bridge_path", default=None, help="CSV soc,isco,share.")
@click.option("--bridge-variant", type=click.Choice(["weighted", "modal"]), default="weighted")
@click.option("--out", required=True)
@click.option("--top-pockets", type=int, default=10, show_default=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_link_apply(dataset_path, graph_path, weights_path, bridge_path, bridge_variant, out, top_pockets, config_path, seed):
    """Occupation and industry exposure summaries through the linkage artifacts."""
    ctx = _resolve(
        config_path, seed, None,
        dataset=dataset_path, graph=graph_path, weights=weights_path, bridge=bridge_path, bridge_variant=bridge_variant,
    )
    dataset = _load_dataset(dataset_path)
    out_dir = Path(out)
    countries = [c for c in dataset.countries() if not c.startswith("income:") and c != "context_free"]

    if weights_path:
        weights = linkage.load_task_weights(str(_require(weights_path)))
        soc_rows = []
        isco_rows = []
        bridge = linkage.load_bridge(str(_require(bridge_path)), variant=bridge_variant) if bridge_path else None
        isco_exposed: dict[str, list[float]] = {}
        isco_margin: dict[str, dict[str, list[float]]] = {m.value: {} for m in (Margin.SUBSTITUTE, Margin.AUGMENT)}
        for iso3 in countries:
            cells = linkage.soc_summary(dataset, iso3, weights)
            for soc, cell in sorted(cells.items()):
                soc_rows.append(
                    {
                        "iso3": iso3, "soc": soc, "value": cell.value,
                        "exposed_share": cell.exposed_share, "high_share": cell.high_share,
                        **{f"margin_{m.value}": cell.margin_shares[m] for m in DEFINITE_MARGINS},
                        **{f"channel_{c.value}": cell.channel_shares[c] for c in aggregate.ACTIVE_CHANNELS},
                        "ai_material_share": cell.ai_material_share, "dropped_weight": cell.dropped_weight,
                    }
                )
            if bridge:
                by_metric = {
                    "value": linkage.isco_summary({s: c.value for s, c in cells.items()}, bridge),
                    "exposed_share": linkage.isco_summary({s: c.exposed_share for s, c in cells.items()}, bridge),
                    **{
                        f"margin_{m.value}": linkage.isco_summary(
                            {s: c.margin_shares[m] for s, c in cells.items()}, bridge
                        )
                        for m in DEFINITE_MARGINS
                    },
                }
                for isco in sorted(by_metric["value"]):
                    row = {"iso3": iso3, "isco": isco}
                    row.update({metric: values[isco] for metric, values in by_metric.items()})
                    isco_rows.append(row)
                    isco_exposed.setdefault(isco, []).append(by_metric["exposed_share"][isco])
                    for m in (Margin.SUBSTITUTE, Margin.AUGMENT):
                        if by_metric["exposed_share"][isco] > 0:
                            isco_margin[m.value].setdefault(isco, []).append(
                                by_metric[f"margin_{m.value}"][isco] / by_metric["exposed_share"][isco]
                            )
        _write_csv(
            out_dir / "occupation_summary.csv", ctx,
            ["iso3", "soc", "value", "exposed_share", "high_share"]
            + [f"margin_{m.value}" for m in DEFINITE_MARGINS]
            + [f"channel_{c.value}" for c in aggregate.ACTIVE_CHANNELS]
            + ["ai_material_share", "dropped_weight"],
            soc_rows,
        )
        if bridge:
            _write_csv(
                out_dir / "isco_summary.csv", ctx,
                ["iso3", "isco", "value", "exposed_share"] + [f"margin_{m.value}" for m in DEFINITE_MARGINS],
                isco_rows,
            )
            pocket_rows = []
            for margin_name, per_unit in sorted(isco_margin.items()):
                units = {
                    isco: (
                        math.fsum(isco_exposed[isco]) / len(isco_exposed[isco]),
                        math.fsum(shares) / len(shares),
                    )
                    for isco, shares in per_unit.items()
                }
                for rank, pocket in enumerate(linkage.margin_pockets(units, top_n=top_pockets), start=1):
                    pocket_rows.append(
                        {
                            "margin": margin_name, "rank": rank, "isco": pocket.unit,
                            "exposed_share": pocket.exposed_share, "margin_share": pocket.margin_share,
                            "product": pocket.product,
                        }
                    )
            _write_csv(
                out_dir / "pockets_occupation.csv", ctx,
                ["margin", "rank", "isco", "exposed_share", "margin_share", "product"],
                pocket_rows,
            )

    if graph_path:
        graph = linkage.load_graph(str(_require(graph_path)))
        industry_rows = []
        for iso3 in countries:
            summary = linkage.industry_summary(dataset, iso3, graph)
            for division, cell in sorted(summary.divisions.items()):
                industry_rows.append(
                    {
                        "iso3": iso3, "division": division, "value": cell.value,
                        "exposed_share": cell.exposed_share,
                        **{
                            f"margin_within_{m.value}": (
                                cell.margin_shares_within[m] if cell.margin_shares_within else None
                            )
                            for m in DEFINITE_MARGINS
                        },
                        "ai_material_share_exposed": cell.ai_material_share_exposed,
                        "n_tasks": cell.n_tasks,
                    }
                )
        _write_csv(
            out_dir / "industry_summary.csv", ctx,
            ["iso3", "division", "value", "exposed_share"]
            + [f"margin_within_{m.value}" for m in DEFINITE_MARGINS]
            + ["ai_material_share_exposed", "n_tasks"],
            industry_rows,
        )
    click.echo(f"linkage summaries -> {out_dir}")


# --- reweight ----------------------------------------------------------------------


@cli.command("reweight")
@click.option("--employment", "employment_path", required=True)
@click.option("--cell-values", "cell_values_path", required=True,
              help="CSV iso3,cell_id,value[,substitute,augment,both] with per-cell exposure metrics.")
@click.option("--window", default="2015:2025", show_default=True)
@click.option("--min-groups", type=int, default=8, show_default=True)
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_reweight(employment_path, cell_values_path, window, min_groups, out, config_path, seed):
    """Employment-weighted exposure, gender gaps, and the FE panel."""
    ctx = _resolve(config_path, seed, None, employment=employment_path, cell_values=cell_values_path,
                   window=window, min_groups=min_groups)
    lo, hi = (int(part) for part in window.split(":"))
    table = ingest.load_employment(str(_require(employment_path)))
    coverage = reweight.coverage_filter(table, window=(lo, hi), min_groups=min_groups)
    rows = _read_table(cell_values_path)
    margins = [c for c in rows[0] if c not in ("iso3", "cell_id")] if rows else []
    values: dict[str, dict[str, dict[str, float]]] = {}
    for row in rows:
        values.setdefault(row["iso3"], {})[row["cell_id"]] = {m: float(row[m]) for m in margins if row.get(m, "") != ""}
    out_dir = Path(out)

    weight_rows = []
    for kind, vectors in (("total", coverage.totals), ("female", coverage.female), ("male", coverage.male)):
        for iso3, vector in sorted(vectors.items()):
            for cell, share in vector.cells:
                weight_rows.append({"iso3": iso3, "sex": kind, "year": vector.year, "cell_id": cell, "share": share})
    _write_csv(out_dir / "weights.csv", ctx, ["iso3", "sex", "year", "cell_id", "share"], weight_rows)

    adjust_rows = []
    for iso3, vector in sorted(coverage.totals.items()):
        if iso3 not in values or "value" not in margins:
            continue
        cell_values = {cell: metrics["value"] for cell, metrics in values[iso3].items() if "value" in metrics}
        if not cell_values:
            continue
        baseline = math.fsum(cell_values[c] for c in sorted(cell_values)) / len(cell_values)
        result = reweight.employment_weighted_exposure(cell_values, vector, baseline=baseline)
        adjust_rows.append(
            {
                "iso3": iso3, "year": vector.year, "baseline_equal_weight": baseline,
                "employment_weighted": result.value, "adjustment": result.adjustment,
                "dropped_share": result.dropped_share,
            }
        )
    _write_csv(
        out_dir / "adjustments.csv", ctx,
        ["iso3", "year", "baseline_equal_weight", "employment_weighted", "adjustment", "dropped_share"],
        adjust_rows,
    )

    gap_rows = []
    for iso3 in sorted(set(coverage.female) & set(coverage.male) & set(values)):
        try:
            result = reweight.gender_gap(values[iso3], coverage.female[iso3], coverage.male[iso3])
        except ReweightError:
            continue
        for margin, gap in sorted(result.gaps_pp.items()):
            gap_rows.append({"iso3": iso3, "year": result.year, "margin": margin, "gap_pp": gap})
    _write_csv(out_dir / "gender_gaps.csv", ctx, ["iso3", "year", "margin", "gap_pp"], gap_rows)

    panel = reweight.gender_fe_panel(values, coverage.female, coverage.male)
    panel_fields = ["iso3", "cell_id", "y_pp"] + [f"x_{m}" for m in margins]
    panel_rows = [
        {"iso3": row.iso3, "cell_id": row.cell_id, "y_pp": row.y_pp, **{f"x_{m}": row.x.get(m) for m in margins}}
        for row in panel
    ]
    _write_csv(out_dir / "fe_panel.csv", ctx, panel_fields, panel_rows)
    click.echo(
        f"reweighted {len(adjust_rows)} countries, {len(gap_rows)} gap rows, {len(panel_rows)} panel rows -> {out_dir}"
    )


# --- validate -----------------------------------------------------------------------


@cli.group("validate")
def cmd_validate() -> None:
    """Internal-validity checks over labelling runs."""


def _agreement_payload(report: validate.AgreementReport) -> dict:
    return {
        "n": report.n,
        "exact_level": report.exact_level,
        "within_one_level": report.within_one_level,
        "binary_exposed": report.binary_exposed,
        "per_field": report.per_field,
        "confusion": [list(row) for row in report.confusion],
        "baselines": {k: v for k, v in sorted(report.baselines.items())},
    }


@cmd_validate.command("agreement")
@click.option("--run-a", "run_a_path", required=True)
@click.option("--run-b", "run_b_path", required=True)
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_validate_agreement(run_a_path, run_b_path, out, config_path, seed):
    ctx = _resolve(config_path, seed, None, run_a=run_a_path, run_b=run_b_path)
    report = validate.agreement_suite(_load_dataset(run_a_path), _load_dataset(run_b_path))
    _write_json(Path(out), ctx, _agreement_payload(report))
    click.echo(
        f"n={report.n} exact={report.exact_level:.4f} within_one={report.within_one_level:.4f} "
        f"binary={report.binary_exposed:.4f}"
    )


@cmd_validate.command("paraphrase")
@click.option("--original", "original_path", required=True)
@click.option("--variant", "variant_paths", multiple=True, required=True)
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_validate_paraphrase(original_path, variant_paths, out, config_path, seed):
    ctx = _resolve(config_path, seed, None, original=original_path, variants=list(variant_paths))
    report = validate.paraphrase_stability(
        _load_dataset(original_path), [_load_dataset(p) for p in variant_paths]
    )
    payload = {
        "n": report.n,
        "joint_within_one": report.joint_within_one,
        "pairwise_within_one": [list(row) for row in report.pairwise_within_one],
        "per_variant": [_agreement_payload(r) for r in report.per_variant],
    }
    _write_json(Path(out), ctx, payload)
    click.echo(f"n={report.n} joint_within_one={report.joint_within_one:.4f}")


@cmd_validate.command("screen")
@click.option("--dataset", "dataset_path", required=True)
@click.option("--lexicon", "lexicon_path", default=None, help="JSON {rule_id: [phrases]}.")
@click.option("--out", required=True, help="Output directory.")
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_validate_screen(dataset_path, lexicon_path, out, config_path, seed):
    ctx = _resolve(config_path, seed, None, dataset=dataset_path, lexicon=lexicon_path)
    lexicon = None
    if lexicon_path:
        lexicon = {rule: tuple(phrases) for rule, phrases in json.loads(_read_text(lexicon_path)).items()}
    report = validate.consistency_screen(_load_dataset(dataset_path), lexicon=lexicon)
    out_dir = Path(out)
    _write_csv(
        out_dir / "screen_flags.csv", ctx,
        ["country", "task_id", "rule_id", "phrase", "sentence"],
        [
            {"country": f.key[0], "task_id": f.key[1], "rule_id": f.rule_id, "phrase": f.phrase, "sentence": f.sentence}
            for f in report.flags
        ],
    )
    _write_json(
        out_dir / "screen_stats.json", ctx,
        {
            "n_records": report.n_records,
            "n_flagged_records": report.n_flagged_records,
            "union_share": report.union_share,
            "lexicon_digest": report.lexicon_digest,
            "per_rule": {
                rule: {"eligible": s.eligible, "flagged": s.flagged, "share": s.share}
                for rule, s in sorted(report.per_rule.items())
            },
        },
    )
    click.echo(f"flagged {report.n_flagged_records} of {report.n_records} records ({report.union_share:.4%})")


@cmd_validate.command("divergence")
@click.option("--pairs", "pairs_path", required=True, help="CSV text_a,text_b[,country_a,country_b].")
@click.option("--embedder", "embedder_spec", default="hash")
@click.option("--no-cosine", is_flag=True, help="Disable the embedding route.")
@click.option("--jaccard-threshold", type=float, default=0.40, show_default=True)
@click.option("--cosine-threshold", type=float, default=0.55, show_default=True)
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_validate_divergence(pairs_path, embedder_spec, no_cosine, jaccard_threshold, cosine_threshold, out, config_path, seed):
    ctx = _resolve(config_path, seed, None, pairs=pairs_path, embedder=None if no_cosine else embedder_spec,
                   jaccard_threshold=jaccard_threshold, cosine_threshold=cosine_threshold)
    pairs = [
        validate.RationalePair(
            text_a=row["text_a"], text_b=row["text_b"],
            country_a=row.get("country_a") or None, country_b=row.get("country_b") or None,
        )
        for row in _read_table(pairs_path)
    ]
    report = validate.rationale_divergence(
        pairs,
        embedder=None if no_cosine else _embedder(embedder_spec),
        jaccard_threshold=jaccard_threshold,
        cosine_threshold=cosine_threshold,
    )
    payload = {
        "n_pairs": len(report.pairs),
        "n_skipped": report.n_skipped,
        "quadrant_shares": report.quadrant_shares,
        "jaccard_threshold": report.jaccard_threshold,
        "cosine_threshold": report.cosine_threshold,
        "stopword_digest": report.stopword_digest,
        "pairs": [
            {"jaccard": m.jaccard, "cosine": m.cosine, "mentions_a": m.mentions_a, "mentions_b": m.mentions_b}
            for m in report.pairs
        ],
    }
    _write_json(Path(out), ctx, payload)
    click.echo(f"{len(report.pairs)} pairs scored, {report.n_skipped} skipped")


@cmd_validate.command("distribution")
@click.option("--dataset", "dataset_path", required=True)
@click.option("--registry", "registry_path", default=None)
@click.option("--group-by", "group_by", type=click.Choice(["income_group", "region"]), default=None)
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_validate_distribution(dataset_path, registry_path, group_by, out, config_path, seed):
    ctx = _resolve(config_path, seed, None, dataset=dataset_path, registry=registry_path, group_by=group_by)
    registry = ingest.load_country_registry(str(_require(registry_path))) if registry_path else None
    tables = validate.distribution_check(_load_dataset(dataset_path), registry=registry, group_by=group_by)
    _write_json(Path(out), ctx, {"groups": tables.groups, "group_sizes": tables.group_sizes})
    click.echo(f"distribution tables for {len(tables.groups)} group(s) -> {out}")


# --- stats -------------------------------------------------------------------------


@cli.group("stats")
def cmd_stats() -> None:
    """Statistical procedures over CSV tables."""


@cmd_stats.command("corr")
@click.option("--table", "table_path", required=True)
@click.option("--key-column", default="iso3", show_default=True)
@click.option("--x", "x_col", required=True)
@click.option("--y", "y_col", required=True)
@click.option("--controls", default=None, help="Comma-separated control columns (partial correlation).")
@click.option("--method", type=click.Choice(["pearson", "spearman"]), default="pearson", show_default=True)
@click.option("--loo", is_flag=True, help="Leave-one-out stability of the Pearson correlation.")
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_stats_corr(table_path, key_column, x_col, y_col, controls, method, loo, out, config_path, seed):
    ctx = _resolve(config_path, seed, None, table=table_path, x=x_col, y=y_col, controls=controls, method=method)
    rows = _read_table(table_path)
    x = _series(rows, key_column, x_col)
    y = _series(rows, key_column, y_col)
    payload: dict[str, Any] = {"x": x_col, "y": y_col, "method": method}
    if controls:
        names = [c.strip() for c in controls.split(",") if c.strip()]
        result = partial_correlation(x, y, [_series(rows, key_column, c) for c in names])
        payload.update({"partial": True, "controls": names, "value": result.value, "n": result.n})
    else:
        result = (pearson if method == "pearson" else spearman)(x, y)
        payload.update({"partial": False, "value": result.value, "n": result.n})
    if loo:
        stability = leave_one_out(x, y)
        payload["leave_one_out"] = {"min": stability.min, "max": stability.max, "sd": stability.sd}
    _write_json(Path(out), ctx, payload)
    click.echo(f"{method}{' partial' if controls else ''} = {payload['value']:.6f} (n={payload['n']})")


@cmd_stats.command("loess")
@click.option("--table", "table_path", required=True)
@click.option("--x", "x_col", required=True)
@click.option("--y", "y_col", required=True)
@click.option("--span", type=float, default=0.75, show_default=True)
@click.option("--resamples", type=int, default=200, show_default=True)
@click.option("--level", type=float, default=0.95, show_default=True)
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_stats_loess(table_path, x_col, y_col, span, resamples, level, out, config_path, seed):
    """LOESS fit with a percentile bootstrap band over row resamples."""
    ctx = _resolve(config_path, seed, None, table=table_path, x=x_col, y=y_col, span=span,
                   resamples=resamples, level=level)
    rows = _read_table(table_path)
    x = _column(rows, x_col)
    y = _column(rows, y_col)
    fit = loess(x, y, span=span)

    def refit(units):
        idx = list(units)
        return loess(x[idx], y[idx], span=span, grid=fit.grid).values

    band = bootstrap_band(refit, list(range(len(x))), resamples=resamples, level=level, seed=ctx.seed)
    _write_json(
        Path(out), ctx,
        {
            "span": span, "grid": fit.grid.tolist(), "fitted": fit.values.tolist(),
            "lower": band.lower.tolist(), "upper": band.upper.tolist(),
            "level": level, "resamples": resamples,
        },
    )
    click.echo(f"loess fit on {len(x)} points, {resamples} resamples -> {out}")


@cmd_stats.command("vardecomp")
@click.option("--matrix", "matrix_path", required=True, help="CSV: first column row id, rest numeric.")
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_stats_vardecomp(matrix_path, out, config_path, seed):
    ctx = _resolve(config_path, seed, None, matrix=matrix_path)
    rows = _read_table(matrix_path)
    if not rows:
        raise IngestError(f"{matrix_path} has no data rows")
    columns = [c for c in rows[0] if c != list(rows[0])[0]]
    key_col = list(rows[0])[0]
    matrix = np.asarray(
        [[float(row[c]) if row.get(c, "") != "" else np.nan for c in columns] for row in rows]
    )
    shares = variance_decomposition(matrix)
    _write_json(
        Path(out), ctx,
        {
            "row_share": shares.row_share, "col_share": shares.col_share,
            "interaction_share": shares.interaction_share, "total_ss": shares.total_ss,
            "complete": shares.complete, "degenerate": shares.degenerate,
            "n_rows": len(rows), "n_cols": len(columns), "row_key": key_col,
        },
    )
    click.echo(
        f"rows {shares.row_share} cols {shares.col_share} interaction {shares.interaction_share}"
    )


@cmd_stats.command("fe")
@click.option("--table", "table_path", required=True)
@click.option("--y", "y_col", required=True)
@click.option("--x", "x_col", required=True)
@click.option("--row-fe", "row_col", required=True)
@click.option("--col-fe", "col_col", required=True)
@click.option("--cluster", "cluster_col", default=None, help="Defaults to the row-FE column.")
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_stats_fe(table_path, y_col, x_col, row_col, col_col, cluster_col, out, config_path, seed):
    """Two-way fixed-effects regression with country-clustered errors."""
    ctx = _resolve(config_path, seed, None, table=table_path, y=y_col, x=x_col, row_fe=row_col,
                   col_fe=col_col, cluster=cluster_col)
    rows = _read_table(table_path)
    usable = [r for r in rows if r.get(y_col, "") != "" and r.get(x_col, "") != ""]
    result = fe_regression(
        [float(r[y_col]) for r in usable],
        [float(r[x_col]) for r in usable],
        [r[row_col] for r in usable],
        [r[col_col] for r in usable],
        [r[cluster_col or row_col] for r in usable],
    )
    _write_json(
        Path(out), ctx,
        {
            "beta": result.beta, "se": result.se, "n": result.n,
            "n_clusters": result.n_clusters, "n_row_groups": result.n_row_groups,
            "n_col_groups": result.n_col_groups, "k_effective": result.k_effective,
        },
    )
    table_row = {
        "outcome": y_col, "regressor": x_col, "beta": result.beta, "se": result.se,
        "n": result.n, "n_clusters": result.n_clusters,
        "n_row_groups": result.n_row_groups, "n_col_groups": result.n_col_groups,
        "row_fe": "yes", "col_fe": "yes", "cluster": cluster_col or row_col,
    }
    _write_csv(Path(out).with_suffix(".csv"), ctx, list(table_row), [table_row])
    click.echo(f"beta={result.beta:.6f} se={result.se:.6f} n={result.n} clusters={result.n_clusters}")


def _forest_inputs(rows, y_col, features):
    names = [f.strip() for f in features.split(",") if f.strip()]
    X = np.column_stack([_column(rows, name) for name in names])
    y = _column(rows, y_col)
    return names, X, y


@cmd_stats.command("forest")
@click.option("--table", "table_path", required=True)
@click.option("--y", "y_col", required=True)
@click.option("--features", required=True, help="Comma-separated feature columns.")
@click.option("--trees", type=int, default=500, show_default=True)
@click.option("--min-leaf", type=int, default=2, show_default=True)
@click.option("--mtry", type=int, default=None)
@click.option("--max-depth", type=int, default=None)
@click.option("--repeats", type=int, default=5, show_default=True)
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_stats_forest(table_path, y_col, features, trees, min_leaf, mtry, max_depth, repeats, out, config_path, seed):
    """Fit a regression forest and report permutation importances."""
    ctx = _resolve(config_path, seed, None, table=table_path, y=y_col, features=features, trees=trees,
                   min_leaf=min_leaf, mtry=mtry, max_depth=max_depth, repeats=repeats)
    rows = _read_table(table_path)
    names, X, y = _forest_inputs(rows, y_col, features)
    params = ForestParams(n_trees=trees, mtry=mtry, min_leaf=min_leaf, max_depth=max_depth)
    forest = fit_forest(X, y, params, seed=ctx.seed)
    predictions = forest.predict(X)
    sst = float(((y - y.mean()) ** 2).sum())
    train_r2 = 1.0 - float(((predictions - y) ** 2).sum()) / sst if sst > 0 else None
    importances = permutation_importance(forest, X, y, seed=ctx.seed, repeats=repeats)
    _write_json(
        Path(out), ctx,
        {
            "features": names, "n": len(y), "train_r2": train_r2,
            "constant_outcome": forest.constant_outcome,
            "permutation_importance": {name: float(v) for name, v in zip(names, importances)},
            "params": {"n_trees": trees, "mtry": mtry, "min_leaf": min_leaf, "max_depth": max_depth},
        },
    )
    click.echo(f"forest fit on {len(y)} rows, train R2 {train_r2}")


@cmd_stats.command("shap")
@click.option("--table", "table_path", required=True)
@click.option("--y", "y_col", required=True)
@click.option("--features", required=True)
@click.option("--trees", type=int, default=500, show_default=True)
@click.option("--min-leaf", type=int, default=2, show_default=True)
@click.option("--mtry", type=int, default=None)
@click.option("--max-depth", type=int, default=None)
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_stats_shap(table_path, y_col, features, trees, min_leaf, mtry, max_depth, seeds, out, config_path, seed):
    """Mean absolute attribution ranking (outcome units x 100) across seeds."""
    ctx = _resolve(config_path, seed, None, table=table_path, y=y_col, features=features, trees=trees,
                   min_leaf=min_leaf, mtry=mtry, max_depth=max_depth, seeds=seeds)
    rows = _read_table(table_path)
    names, X, y = _forest_inputs(rows, y_col, features)
    seed_list = tuple(int(s) for s in seeds.split(","))
    params = ForestParams(n_trees=trees, mtry=mtry, min_leaf=min_leaf, max_depth=max_depth)
    ranking = mean_abs_shap(X, y, params, seeds=seed_list)
    _write_json(
        Path(out), ctx,
        {
            "features": names,
            "mean_abs_shap_x100": {name: float(v) for name, v in zip(names, ranking.mean_abs)},
            "ranking": [names[i] for i in ranking.order],
            "seeds": list(seed_list),
        },
    )
    click.echo("ranking: " + ", ".join(names[i] for i in ranking.order))


@cmd_stats.command("ale")
@click.option("--table", "table_path", required=True)
@click.option("--y", "y_col", required=True)
@click.option("--features", required=True)
@click.option("--feature", "target_feature", required=True, help="Feature whose effect to accumulate.")
@click.option("--bins", type=int, default=10, show_default=True)
@click.option("--trees", type=int, default=500, show_default=True)
@click.option("--min-leaf", type=int, default=2, show_default=True)
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_stats_ale(table_path, y_col, features, target_feature, bins, trees, min_leaf, out, config_path, seed):
    """Fit a forest, then the 1-D accumulated local effect of one feature."""
    ctx = _resolve(config_path, seed, None, table=table_path, y=y_col, features=features,
                   feature=target_feature, bins=bins, trees=trees, min_leaf=min_leaf)
    rows = _read_table(table_path)
    names, X, y = _forest_inputs(rows, y_col, features)
    if target_feature not in names:
        raise IngestError(f"--feature {target_feature!r} is not among --features")
    forest = fit_forest(X, y, ForestParams(n_trees=trees, min_leaf=min_leaf), seed=ctx.seed)
    result = ale_1d(forest.predict, X, names.index(target_feature), n_bins=bins)
    _write_json(
        Path(out), ctx,
        {
            "feature": target_feature, "grid": result.grid.tolist(), "ale": result.values.tolist(),
            "direction": result.direction, "bin_counts": result.bin_counts.tolist(),
            "merged_bins": result.merged_bins,
        },
    )
    click.echo(f"ALE direction for {target_feature}: {result.direction:+d}")


@cmd_stats.command("dominance")
@click.option("--table", "table_path", required=True)
@click.option("--y", "y_col", required=True)
@click.option("--features", required=True)
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_stats_dominance(table_path, y_col, features, out, config_path, seed):
    """Exact Shapley R^2 decomposition over all predictor orderings."""
    ctx = _resolve(config_path, seed, None, table=table_path, y=y_col, features=features)
    rows = _read_table(table_path)
    names, X, y = _forest_inputs(rows, y_col, features)
    result = shapley_r2(X, y)
    _write_json(
        Path(out), ctx,
        {
            "features": names,
            "contributions": {name: float(v) for name, v in zip(names, result.contributions)},
            "full_r2": result.full_r2,
            "rank_deficient_subsets": result.rank_deficient_subsets,
        },
    )
    click.echo(f"full R2 {result.full_r2:.6f}; contributions sum {float(result.contributions.sum()):.6f}")


# --- report ------------------------------------------------------------------------


@cli.command("report")
@click.option("--dataset", "dataset_path", required=True)
@click.option("--registry", "registry_path", default=None)
@click.option("--out", required=True)
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def cmd_report(dataset_path, registry_path, out, config_path, seed):
    """Headline diagnostics for a dataset: counts, shares, distribution tables."""
    ctx = _resolve(config_path, seed, None, dataset=dataset_path, registry=registry_path)
    dataset = _load_dataset(dataset_path)
    registry = ingest.load_country_registry(str(_require(registry_path))) if registry_path else None
    records = [r for _, r in dataset.items_sorted()]
    n = len(records)
    exposed = sum(1 for r in records if r.exposed)
    tables = validate.distribution_check(dataset)
    by_income = (
        validate.distribution_check(dataset, registry=registry, group_by="income_group").groups
        if registry
        else None
    )
    _write_json(
        Path(out), ctx,
        {
            "n_records": n,
            "n_countries": len(dataset.countries()),
            "exposed_share": exposed / n if n else None,
            "provenance": [list(p) for p in dataset.provenance],
            "distribution": tables.groups["overall"],
            "distribution_by_income_group": by_income,
        },
    )
    click.echo(f"{n} records across {len(dataset.countries())} countries -> {out}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except INPUT_ERRORS as exc:
        click.echo(f"input error: {exc}", err=True)
        return 2
    except Exception as exc:  # invariant violations and bugs
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
