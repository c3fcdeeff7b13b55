"""Country-level and group summaries, pathway states, transition matrices,
polarisation/tilt, and benchmark-ladder deviations."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import (
    ACTIVE_AI_FUNCTIONS,
    ACTIVE_CHANNELS,
    AiFunction,
    BenchmarkContext,
    Channel,
    CountryContext,
    DEFINITE_MARGINS,
    IncomeGroup,
    Margin,
    TaskLabelRecord,
)
from .ingest import LabelDataset


class AggregateError(Exception):
    pass


@dataclass(frozen=True)
class CountrySummary:
    """Per-country shares under explicit denominators.

    ``margin_shares_all`` uses the full task universe; ``margin_shares_within``
    renormalizes over exposed tasks with a definite margin (exposed records with
    an unclear margin stay in ``exposed_share`` but are excluded here, surfaced
    via ``n_unclear_exposed``). Channel and AI shares condition on exposed
    tasks; the AI function mix conditions on AI-material exposed tasks.
    """

    iso3: str
    n_tasks: int
    n_exposed: int
    n_margin_known_exposed: int
    n_unclear_exposed: int
    n_ai_material_exposed: int
    margin_counts_exposed: dict[Margin, int]
    exposed_share: float
    high_share: float
    margin_shares_all: dict[Margin, float]
    margin_shares_within: Optional[dict[Margin, float]]
    channel_shares_exposed: Optional[dict[Channel, float]]
    channel_none_exposed_share: Optional[float]
    ai_material_share_exposed: Optional[float]
    ai_function_mix: Optional[dict[AiFunction, float]]

    @property
    def margin_known_exposed_share(self) -> float:
        return self.n_margin_known_exposed / self.n_tasks if self.n_tasks else 0.0


def country_summary(dataset: LabelDataset, iso3: str) -> CountrySummary:
    """Counting summary for one country; shares are exact integer ratios."""
    records = dataset.for_country(iso3)
    if not records:
        raise AggregateError(f"no records for country {iso3!r}")
    return summarize_records(iso3, records)


def summarize_records(iso3: str, records: Sequence[TaskLabelRecord]) -> CountrySummary:
    n = len(records)
    exposed = [r for r in records if r.exposed]
    n_exposed = len(exposed)
    n_high = sum(1 for r in records if r.exposure == 3)
    margin_counts = Counter(r.margin for r in exposed)
    n_known = sum(margin_counts[m] for m in DEFINITE_MARGINS)
    n_unclear_exposed = margin_counts[Margin.UNCLEAR]
    channel_counts = Counter(r.channel for r in exposed)
    ai_exposed = [r for r in exposed if r.ai_material]
    function_counts = Counter(r.ai_function for r in ai_exposed if r.ai_function is not AiFunction.NONE)
    n_function = sum(function_counts.values())

    margin_all = {m: margin_counts[m] / n for m in DEFINITE_MARGINS}
    margin_within = (
        {m: margin_counts[m] / n_known for m in DEFINITE_MARGINS} if n_known > 0 else None
    )
    channel_shares = (
        {c: channel_counts[c] / n_exposed for c in ACTIVE_CHANNELS} if n_exposed > 0 else None
    )
    return CountrySummary(
        iso3=iso3,
        n_tasks=n,
        n_exposed=n_exposed,
        n_margin_known_exposed=n_known,
        n_unclear_exposed=n_unclear_exposed,
        n_ai_material_exposed=len(ai_exposed),
        margin_counts_exposed={m: margin_counts[m] for m in Margin},
        exposed_share=n_exposed / n,
        high_share=n_high / n,
        margin_shares_all=margin_all,
        margin_shares_within=margin_within,
        channel_shares_exposed=channel_shares,
        channel_none_exposed_share=(channel_counts[Channel.NONE] / n_exposed) if n_exposed > 0 else None,
        ai_material_share_exposed=(len(ai_exposed) / n_exposed) if n_exposed > 0 else None,
        ai_function_mix=(
            {f: function_counts[f] / n_function for f in ACTIVE_AI_FUNCTIONS} if n_function > 0 else None
        ),
    )


def summarize_all(dataset: LabelDataset, jobs: int = 1) -> dict[str, CountrySummary]:
    """Summaries for every country; per-country work is independent, results are
    merged in sorted country order so worker counts never change the output."""
    buckets = dataset.by_country()
    countries = list(buckets)
    if jobs <= 1 or len(countries) <= 1:
        return {iso3: summarize_records(iso3, buckets[iso3]) for iso3 in countries}
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(lambda c: summarize_records(c, buckets[c]), countries))
    return {iso3: summary for iso3, summary in zip(countries, results)}


# --- group summaries ----------------------------------------------------------


@dataclass(frozen=True)
class GroupSummary:
    group: str
    n_countries: int
    means: dict[str, float]
    field_counts: dict[str, int]


_SCALAR_FIELDS = ("exposed_share", "high_share")


def _summary_fields(summary: CountrySummary) -> dict[str, Optional[float]]:
    fields: dict[str, Optional[float]] = {name: getattr(summary, name) for name in _SCALAR_FIELDS}
    for m in DEFINITE_MARGINS:
        fields[f"margin_all_{m.value}"] = summary.margin_shares_all[m]
        fields[f"margin_within_{m.value}"] = (
            summary.margin_shares_within[m] if summary.margin_shares_within else None
        )
    for c in ACTIVE_CHANNELS:
        fields[f"channel_{c.value}"] = (
            summary.channel_shares_exposed[c] if summary.channel_shares_exposed else None
        )
    fields["ai_material_share_exposed"] = summary.ai_material_share_exposed
    for f in ACTIVE_AI_FUNCTIONS:
        fields[f"ai_function_{f.value}"] = summary.ai_function_mix[f] if summary.ai_function_mix else None
    return fields


def group_summary(
    summaries: Iterable[CountrySummary],
    registry: Mapping[str, CountryContext],
    group_field: str = "income_group",
) -> dict[str, GroupSummary]:
    """Unweighted mean of each per-country share within each registry group."""
    if group_field not in ("income_group", "region"):
        raise AggregateError(f"unknown grouping field {group_field!r}")
    grouped: dict[str, list[CountrySummary]] = {}
    for summary in sorted(summaries, key=lambda s: s.iso3):
        context = registry.get(summary.iso3)
        if context is None:
            raise AggregateError(f"country {summary.iso3} is not registered")
        value = getattr(context, group_field)
        key = value.value if isinstance(value, Enum) else str(value)
        grouped.setdefault(key, []).append(summary)

    out: dict[str, GroupSummary] = {}
    for key in sorted(grouped):
        members = grouped[key]
        field_values: dict[str, list[float]] = {}
        for summary in members:
            for name, value in _summary_fields(summary).items():
                if value is not None:
                    field_values.setdefault(name, []).append(value)
        means = {name: math.fsum(vals) / len(vals) for name, vals in sorted(field_values.items())}
        counts = {name: len(vals) for name, vals in sorted(field_values.items())}
        out[key] = GroupSummary(group=key, n_countries=len(members), means=means, field_counts=counts)
    return out


# --- pathway states and transitions -------------------------------------------


class PathwayState(str, Enum):
    NOT_EXPOSED = "not_exposed"
    SUBSTITUTE = "substitute"
    AUGMENT = "augment"
    BOTH = "both"


STATE_ORDER = (PathwayState.NOT_EXPOSED, PathwayState.SUBSTITUTE, PathwayState.AUGMENT, PathwayState.BOTH)

_MARGIN_TO_STATE = {
    Margin.SUBSTITUTE: PathwayState.SUBSTITUTE,
    Margin.AUGMENT: PathwayState.AUGMENT,
    Margin.BOTH: PathwayState.BOTH,
}


def pathway_state(record: TaskLabelRecord) -> Optional[PathwayState]:
    """Map a normalized record to its pathway state.

    Sub-threshold records are not_exposed; exposed records follow their margin.
    Exposed records with an unclear margin return None (the anomaly bucket,
    excluded from transitions and surfaced by callers).
    """
    if not record.exposed:
        return PathwayState.NOT_EXPOSED
    return _MARGIN_TO_STATE.get(record.margin)


def pathway_states(dataset: LabelDataset, country: str) -> tuple[dict[str, PathwayState], int]:
    """Per-task states for one country tag; returns (states, anomaly count)."""
    states: dict[str, PathwayState] = {}
    anomalies = 0
    for record in dataset.for_country(country):
        state = pathway_state(record)
        if state is None:
            anomalies += 1
        else:
            states[record.task_id] = state
    return states, anomalies


def modal_pathway_states(
    dataset: LabelDataset, countries: Sequence[str]
) -> tuple[dict[str, PathwayState], int]:
    """Per-task modal state across a country group.

    Ties break to the lexicographically smallest state name, matching the
    deduplication tie rule; tasks whose every record is anomalous are dropped.
    """
    votes: dict[str, list[PathwayState]] = {}
    anomalies = 0
    buckets = dataset.by_country()
    for iso3 in sorted(countries):
        for record in buckets.get(iso3, ()):
            state = pathway_state(record)
            if state is None:
                anomalies += 1
            else:
                votes.setdefault(record.task_id, []).append(state)
    modal: dict[str, PathwayState] = {}
    for task_id in sorted(votes):
        counts = Counter(votes[task_id])
        modal[task_id] = min(counts, key=lambda s: (-counts[s], s.value))
    return modal, anomalies


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic 4x4 share matrix over pathway states (rows = source)."""

    states: tuple[PathwayState, ...]
    counts: np.ndarray  # (4, 4) integer counts
    shares: np.ndarray  # (4, 4) rows sum to 1 where the source state is occupied

    def row_sums(self) -> np.ndarray:
        return self.shares.sum(axis=1)


def transition_matrix(
    states_a: Mapping[str, PathwayState], states_b: Mapping[str, PathwayState]
) -> TransitionMatrix:
    """Share of tasks in source state i under A that are in state j under B."""
    if set(states_a) != set(states_b):
        missing = sorted(set(states_a) ^ set(states_b))
        raise AggregateError(f"mismatched task sets ({len(missing)} tasks differ, e.g. {missing[:3]})")
    index = {state: i for i, state in enumerate(STATE_ORDER)}
    counts = np.zeros((4, 4), dtype=np.int64)
    for task_id in sorted(states_a):
        counts[index[states_a[task_id]], index[states_b[task_id]]] += 1
    shares = np.zeros((4, 4), dtype=np.float64)
    for i in range(4):
        row_total = counts[i].sum()
        if row_total > 0:
            shares[i] = counts[i] / row_total
    return TransitionMatrix(states=STATE_ORDER, counts=counts, shares=shares)


# --- polarisation ----------------------------------------------------------------


@dataclass(frozen=True)
class Polarisation:
    """Mass outside balanced-both within exposed work (P) and its substitution
    tilt T = sub/(sub+aug); T is undefined when P = 0."""

    p: float
    tilt: Optional[float]


def polarisation(summary: CountrySummary) -> Polarisation:
    n_known = summary.n_margin_known_exposed
    if n_known == 0:
        raise AggregateError(f"no exposed tasks with a definite margin for {summary.iso3}")
    n_sub = summary.margin_counts_exposed[Margin.SUBSTITUTE]
    n_aug = summary.margin_counts_exposed[Margin.AUGMENT]
    polarised = n_sub + n_aug
    p = polarised / n_known
    tilt = (n_sub / polarised) if polarised > 0 else None
    return Polarisation(p=p, tilt=tilt)


# --- benchmark-ladder deviation ---------------------------------------------------


@dataclass(frozen=True)
class DeviationResult:
    iso3: str
    mean_deviation: float
    n_shared_tasks: int


def benchmark_deviation(
    country_labels: LabelDataset,
    benchmark_labels: LabelDataset,
    income_groups: Mapping[str, IncomeGroup],
) -> dict[str, DeviationResult]:
    """Per country, the mean task-level exposure gap to its matched benchmark.

    The benchmark dataset is keyed by income-group context tags; each country's
    records are differenced task by task against the benchmark run for its
    income group, in exposure-level units.
    """
    results: dict[str, DeviationResult] = {}
    country_buckets = country_labels.by_country()
    benchmark_cache: dict[str, dict[str, int]] = {}
    for iso3 in country_buckets:
        group = income_groups.get(iso3)
        if group is None or group is IncomeGroup.UNCLASSIFIED:
            raise AggregateError(f"country {iso3} has no classified income group")
        tag = BenchmarkContext.for_income_group(group).tag
        if tag not in benchmark_cache:
            benchmark_cache[tag] = {r.task_id: r.exposure for r in benchmark_labels.for_country(tag)}
        benchmark = benchmark_cache[tag]
        if not benchmark:
            raise AggregateError(f"benchmark labels missing for income group '{group.value}'")
        diffs = [
            r.exposure - benchmark[r.task_id]
            for r in country_buckets[iso3]
            if r.task_id in benchmark
        ]
        if not diffs:
            raise AggregateError(f"no task overlap between {iso3} and its benchmark")
        results[iso3] = DeviationResult(
            iso3=iso3, mean_deviation=math.fsum(diffs) / len(diffs), n_shared_tasks=len(diffs)
        )
    return results
