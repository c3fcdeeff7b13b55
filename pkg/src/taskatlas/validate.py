"""Internal-validity suite: run-pair agreement, paraphrase stability, the
rationale predictability harness, consistency screens with negation filtering,
rationale divergence, and distributional checks."""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional, Protocol, Sequence

import numpy as np

from .core import Channel, CountryContext, Margin, TaskLabelRecord, is_exposed
from .ingest import LabelDataset
from .linkage import EmbeddingProvider, ProviderError
from ._rng import rng_for


class ValidateError(Exception):
    pass


# --- agreement ------------------------------------------------------------------


@dataclass(frozen=True)
class AgreementReport:
    n: int
    exact_level: float
    within_one_level: float
    binary_exposed: float
    per_field: dict[str, Optional[float]]
    confusion: tuple[tuple[int, ...], ...]  # 4x4 level counts, rows = first run
    baselines: dict[str, float]


def _marginal(values: Sequence) -> dict:
    counts = Counter(values)
    total = len(values)
    return {k: counts[k] / total for k in sorted(counts, key=str)}


def chance_baseline(marginal_a: Mapping, marginal_b: Mapping) -> float:
    """Expected agreement of two independent draws with the given marginals."""
    keys = sorted(set(marginal_a) | set(marginal_b), key=str)
    return math.fsum(marginal_a.get(k, 0.0) * marginal_b.get(k, 0.0) for k in keys)


def _paired_agreement(
    pairs: Sequence[tuple[TaskLabelRecord, TaskLabelRecord]]
) -> AgreementReport:
    n = len(pairs)
    exact = sum(1 for a, b in pairs if a.exposure == b.exposure) / n
    within = sum(1 for a, b in pairs if abs(a.exposure - b.exposure) <= 1) / n
    binary = sum(1 for a, b in pairs if a.exposed == b.exposed) / n
    confusion = [[0] * 4 for _ in range(4)]
    for a, b in pairs:
        confusion[a.exposure][b.exposure] += 1

    channel_match = sum(1 for a, b in pairs if a.channel is b.channel) / n
    ai_match = sum(1 for a, b in pairs if a.ai_material == b.ai_material) / n
    exposed_pairs = [(a, b) for a, b in pairs if a.exposed and b.exposed]
    margin_match = (
        sum(1 for a, b in exposed_pairs if a.margin is b.margin) / len(exposed_pairs)
        if exposed_pairs
        else None
    )

    baselines = {
        "exposure_level": chance_baseline(
            _marginal([a.exposure for a, _ in pairs]), _marginal([b.exposure for _, b in pairs])
        ),
        "binary_exposed": chance_baseline(
            _marginal([a.exposed for a, _ in pairs]), _marginal([b.exposed for _, b in pairs])
        ),
        "dominant_channel": chance_baseline(
            _marginal([a.channel for a, _ in pairs]), _marginal([b.channel for _, b in pairs])
        ),
        "ai_materiality": chance_baseline(
            _marginal([a.ai_material for a, _ in pairs]), _marginal([b.ai_material for _, b in pairs])
        ),
    }
    if exposed_pairs:
        baselines["margin_exposed"] = chance_baseline(
            _marginal([a.margin for a, _ in exposed_pairs]),
            _marginal([b.margin for _, b in exposed_pairs]),
        )
    return AgreementReport(
        n=n,
        exact_level=exact,
        within_one_level=within,
        binary_exposed=binary,
        per_field={
            "exposure_level": exact,
            "dominant_channel": channel_match,
            "margin_exposed": margin_match,
            "ai_materiality": ai_match,
        },
        confusion=tuple(tuple(row) for row in confusion),
        baselines=baselines,
    )


def agreement_suite(run_a: LabelDataset, run_b: LabelDataset) -> AgreementReport:
    """Field-by-field agreement over the key intersection of two labelling runs.

    Within-one uses |level difference| <= 1; binary compares the exposed band;
    the margin comparison conditions on records exposed in both runs. Chance
    baselines pair each run's empirical marginals under independence.
    """
    keys = sorted(set(run_a.records) & set(run_b.records))
    if not keys:
        raise ValidateError("runs share no (country, task) keys")
    pairs = [(run_a.records[k], run_b.records[k]) for k in keys]
    return _paired_agreement(pairs)


# --- paraphrase stability ----------------------------------------------------------


@dataclass(frozen=True)
class ParaphraseReport:
    n: int
    per_variant: tuple[AgreementReport, ...]
    pairwise_within_one: tuple[tuple[float, ...], ...]
    joint_within_one: float


def paraphrase_stability(original: LabelDataset, variants: Sequence[LabelDataset]) -> ParaphraseReport:
    """Stability of labels under prompt variants.

    All metrics are computed on the task keys common to the original and every
    variant: per-variant agreement against the original, pairwise within-one
    agreement among variants, and the joint share of tasks whose level range
    across all variants stays within one.
    """
    if len(variants) < 2:
        raise ValidateError("need at least two variants")
    keys = set(original.records)
    for variant in variants:
        keys &= set(variant.records)
    keys = sorted(keys)
    if not keys:
        raise ValidateError("no common (country, task) keys across runs")

    per_variant = tuple(
        _paired_agreement([(original.records[k], variant.records[k]) for k in keys])
        for variant in variants
    )
    v = len(variants)
    pairwise = [[1.0] * v for _ in range(v)]
    for i in range(v):
        for j in range(i + 1, v):
            share = sum(
                1
                for k in keys
                if abs(variants[i].records[k].exposure - variants[j].records[k].exposure) <= 1
            ) / len(keys)
            pairwise[i][j] = pairwise[j][i] = share
    joint = sum(
        1
        for k in keys
        if max(variant.records[k].exposure for variant in variants)
        - min(variant.records[k].exposure for variant in variants)
        <= 1
    ) / len(keys)
    return ParaphraseReport(
        n=len(keys),
        per_variant=per_variant,
        pairwise_within_one=tuple(tuple(row) for row in pairwise),
        joint_within_one=joint,
    )


# --- consistency screen ---------------------------------------------------------------

RULE_IDS = (
    "r1_level3_denies",
    "r2_level0_describes",
    "r3_augment_replaces",
    "r4_substitute_assistive",
    "r5_notai_invokes_ai",
)

#: shipped rule phrases; callers can pass their own lexicon
DEFAULT_LEXICON: dict[str, tuple[str, ...]] = {
    "r1_level3_denies": (
        "automation is not possible",
        "cannot be automated",
        "cannot be meaningfully automated",
        "no credible automation",
        "no automation margin",
        "not automatable",
    ),
    "r2_level0_describes": (
        "already automated",
        "routinely automated",
        "standard software automates",
        "widely deployed automation",
        "reliably automated",
    ),
    "r3_augment_replaces": (
        "fully replaces the worker",
        "replaces human labour",
        "replaces human labor",
        "eliminates the need for human",
        "removes the human from the task",
    ),
    "r4_substitute_assistive": (
        "assistive only",
        "only assists",
        "merely assists",
        "does not reduce human labour",
        "does not reduce human labor",
        "humans remain fully central",
    ),
    "r5_notai_invokes_ai": (
        "ai",
        "machine learning",
        "learned model",
        "llm",
        "large language model",
        "neural network",
    ),
}

DEFAULT_NEGATORS: tuple[str, ...] = (
    "not",
    "no",
    "cannot",
    "lacks",
    "without",
    "rather than",
    "wrong to say",
    "never",
)

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?;])\s+")


def _phrase_pattern(phrase: str) -> re.Pattern:
    words = [re.escape(w) for w in phrase.split()]
    return re.compile(r"\b" + r"\s+".join(words) + r"\b", re.IGNORECASE)


@dataclass(frozen=True)
class ConsistencyFlag:
    key: tuple[str, str]
    rule_id: str
    sentence: str
    phrase: str


@dataclass(frozen=True)
class RuleStats:
    eligible: int
    flagged: int

    @property
    def share(self) -> float:
        return self.flagged / self.eligible if self.eligible else 0.0


@dataclass(frozen=True)
class ScreenReport:
    flags: tuple[ConsistencyFlag, ...]
    per_rule: dict[str, RuleStats]
    n_records: int
    n_flagged_records: int
    union_share: float
    lexicon_digest: str


def _rule_eligible(rule_id: str, record: TaskLabelRecord) -> bool:
    if rule_id == "r1_level3_denies":
        return record.exposure == 3
    if rule_id == "r2_level0_describes":
        return record.exposure == 0
    if rule_id == "r3_augment_replaces":
        return record.margin is Margin.AUGMENT
    if rule_id == "r4_substitute_assistive":
        return record.margin is Margin.SUBSTITUTE
    if rule_id == "r5_notai_invokes_ai":
        return not record.ai_material
    raise ValidateError(f"unknown rule {rule_id!r}")


def _match_sentence(sentence: str, phrase_re: re.Pattern, negator_res: Sequence[re.Pattern]) -> Optional[re.Match]:
    """First phrase match with no negator elsewhere in the sentence.

    Negator occurrences inside the matched phrase span do not suppress: rule
    phrases themselves legitimately contain negation words.
    """
    match = phrase_re.search(sentence)
    if match is None:
        return None
    for negator_re in negator_res:
        for hit in negator_re.finditer(sentence):
            overlaps = hit.start() < match.end() and match.start() < hit.end()
            if not overlaps:
                return None
    return match


def consistency_screen(
    dataset: LabelDataset,
    lexicon: Optional[Mapping[str, Sequence[str]]] = None,
    negators: Sequence[str] = DEFAULT_NEGATORS,
) -> ScreenReport:
    """Flag records whose rationale sentence matches a rule phrase without a
    same-sentence negator, under that rule's label eligibility."""
    if lexicon is None:
        lexicon = DEFAULT_LEXICON
    lex = {rule: tuple(phrases) for rule, phrases in lexicon.items()}
    for rule_id in lex:
        if rule_id not in RULE_IDS:
            raise ValidateError(f"unknown rule {rule_id!r}")
        if not lex[rule_id]:
            raise ValidateError(f"rule {rule_id} has an empty phrase list")
    if not lex:
        raise ValidateError("empty lexicon")
    digest_src = json.dumps({"lexicon": {k: list(v) for k, v in sorted(lex.items())}, "negators": list(negators)}, sort_keys=True)
    digest = hashlib.sha256(digest_src.encode("utf-8")).hexdigest()

    phrase_res = {rule: [_phrase_pattern(p) for p in phrases] for rule, phrases in lex.items()}
    negator_res = [_phrase_pattern(n) for n in negators]

    flags: list[ConsistencyFlag] = []
    eligible_counts = {rule: 0 for rule in lex}
    flagged_counts = {rule: 0 for rule in lex}
    flagged_keys: set[tuple[str, str]] = set()
    for key, record in dataset.items_sorted():
        sentences = [s for s in _SENTENCE_SPLIT.split(record.short_rationale) if s.strip()]
        for rule_id in sorted(lex):
            if not _rule_eligible(rule_id, record):
                continue
            eligible_counts[rule_id] += 1
            hit = None
            for sentence in sentences:
                for phrase, phrase_re in zip(lex[rule_id], phrase_res[rule_id]):
                    if _match_sentence(sentence, phrase_re, negator_res) is not None:
                        hit = (sentence, phrase)
                        break
                if hit:
                    break
            if hit:
                flagged_counts[rule_id] += 1
                flagged_keys.add(key)
                flags.append(ConsistencyFlag(key=key, rule_id=rule_id, sentence=hit[0], phrase=hit[1]))
    n = len(dataset)
    return ScreenReport(
        flags=tuple(flags),
        per_rule={rule: RuleStats(eligible_counts[rule], flagged_counts[rule]) for rule in sorted(lex)},
        n_records=n,
        n_flagged_records=len(flagged_keys),
        union_share=len(flagged_keys) / n if n else 0.0,
        lexicon_digest=digest,
    )


# --- rationale divergence -----------------------------------------------------------

DEFAULT_STOPWORDS: frozenset = frozenset(
    """a an and are as at be because been but by can could do does for from had has have
    if in into is it its may more most not of on or should so such than that the their
    then there these they this to was were which while will with would""".split()
)

_TOKEN_RE = re.compile(r"[a-zA-Z]+")


def content_tokens(text: str, stopwords: frozenset = DEFAULT_STOPWORDS) -> frozenset:
    """Lowercased alphabetic tokens of length >= 2, minus stopwords."""
    return frozenset(
        t for t in (m.group(0).lower() for m in _TOKEN_RE.finditer(text)) if len(t) >= 2 and t not in stopwords
    )


def jaccard(tokens_a: frozenset, tokens_b: frozenset) -> float:
    union = tokens_a | tokens_b
    if not union:
        return 0.0
    return len(tokens_a & tokens_b) / len(union)


@dataclass(frozen=True)
class RationalePair:
    text_a: str
    text_b: str
    country_a: Optional[str] = None
    country_b: Optional[str] = None


@dataclass(frozen=True)
class PairMetrics:
    jaccard: float
    cosine: Optional[float]
    mentions_a: Optional[bool]
    mentions_b: Optional[bool]


@dataclass(frozen=True)
class DivergenceReport:
    pairs: tuple[PairMetrics, ...]
    n_skipped: int
    quadrant_shares: Optional[dict[str, float]]
    jaccard_threshold: float
    cosine_threshold: float
    stopword_digest: str


def _mentions(text: str, country: Optional[str]) -> Optional[bool]:
    if country is None:
        return None
    return re.search(r"\b" + re.escape(country) + r"\b", text, re.IGNORECASE) is not None


def rationale_divergence(
    pairs: Sequence[RationalePair],
    stopwords: frozenset = DEFAULT_STOPWORDS,
    embedder: Optional[EmbeddingProvider] = None,
    jaccard_threshold: float = 0.40,
    cosine_threshold: float = 0.55,
) -> DivergenceReport:
    """Token-overlap and semantic-similarity metrics over rationale pairs.

    Jaccard runs over stopword-filtered content tokens; cosine runs over
    embeddings when an embedder is supplied. Pairs with an empty token set on
    either side are skipped and counted. Quadrant shares classify pairs against
    the configured thresholds (only when cosine is enabled).
    """
    metrics: list[PairMetrics] = []
    skipped = 0
    for pair in pairs:
        tokens_a = content_tokens(pair.text_a, stopwords)
        tokens_b = content_tokens(pair.text_b, stopwords)
        if not tokens_a or not tokens_b:
            skipped += 1
            continue
        cosine: Optional[float] = None
        if embedder is not None:
            va = np.asarray(embedder.embed(pair.text_a), dtype=np.float64)
            vb = np.asarray(embedder.embed(pair.text_b), dtype=np.float64)
            na, nb = np.linalg.norm(va), np.linalg.norm(vb)
            if na == 0 or nb == 0:
                raise ProviderError("zero-norm rationale embedding")
            cosine = float(va @ vb / (na * nb))
        metrics.append(
            PairMetrics(
                jaccard=jaccard(tokens_a, tokens_b),
                cosine=cosine,
                mentions_a=_mentions(pair.text_a, pair.country_a),
                mentions_b=_mentions(pair.text_b, pair.country_b),
            )
        )

    quadrants: Optional[dict[str, float]] = None
    if embedder is not None and metrics:
        counts = Counter()
        for m in metrics:
            jac_high = m.jaccard >= jaccard_threshold
            cos_high = (m.cosine or 0.0) >= cosine_threshold
            counts[("high" if jac_high else "low") + "_jaccard/" + ("high" if cos_high else "low") + "_cosine"] += 1
        quadrants = {
            name: counts[name] / len(metrics)
            for name in (
                "low_jaccard/low_cosine",
                "low_jaccard/high_cosine",
                "high_jaccard/low_cosine",
                "high_jaccard/high_cosine",
            )
        }
    stopword_digest = hashlib.sha256(json.dumps(sorted(stopwords)).encode("utf-8")).hexdigest()
    return DivergenceReport(
        pairs=tuple(metrics),
        n_skipped=skipped,
        quadrant_shares=quadrants,
        jaccard_threshold=jaccard_threshold,
        cosine_threshold=cosine_threshold,
        stopword_digest=stopword_digest,
    )


# --- rationale predictability harness --------------------------------------------------


@dataclass(frozen=True)
class PredictedLabel:
    exposure: int
    channel: Optional[Channel] = None
    margin: Optional[Margin] = None
    ai_material: Optional[bool] = None


class LabelPredictor(Protocol):
    def predict(self, task_id: str, country: str, rationale: str) -> PredictedLabel: ...


@dataclass(frozen=True)
class HarnessReport:
    n: int
    exact_level: float
    within_one_level: float
    binary_exposed: float
    per_field: dict[str, Optional[float]]
    confusion: tuple[tuple[int, ...], ...]
    seed: int
    sample_keys: tuple[tuple[str, str], ...]


def stratified_sample(dataset: LabelDataset, per_level: int, seed: int) -> list[TaskLabelRecord]:
    """Equal counts per exposure level, drawn without replacement, seeded."""
    by_level: dict[int, list[TaskLabelRecord]] = {0: [], 1: [], 2: [], 3: []}
    for _, record in dataset.items_sorted():
        by_level[record.exposure].append(record)
    sample: list[TaskLabelRecord] = []
    for level in range(4):
        pool = by_level[level]
        if len(pool) < per_level:
            raise ValidateError(f"level {level} has only {len(pool)} records, need {per_level}")
        idx = rng_for(seed, level).choice(len(pool), size=per_level, replace=False)
        sample.extend(pool[i] for i in sorted(idx.tolist()))
    return sample


def rationale_harness(
    dataset: LabelDataset,
    predictor: LabelPredictor,
    per_level: int,
    seed: int,
    retries: int = 2,
) -> HarnessReport:
    """Predict withheld labels from rationales on a stratified sample and score
    the agreement between predicted and original labels."""
    sample = stratified_sample(dataset, per_level, seed)
    predictions: list[PredictedLabel] = []
    for record in sample:
        last_error: Optional[Exception] = None
        for _ in range(retries + 1):
            try:
                predictions.append(predictor.predict(record.task_id, record.country, record.short_rationale))
                last_error = None
                break
            except Exception as exc:  # provider failures are retried, then fatal
                last_error = exc
        if last_error is not None:
            raise ValidateError(f"predictor failed {retries + 1} times on {record.key}: {last_error}")

    n = len(sample)
    exact = sum(1 for r, p in zip(sample, predictions) if r.exposure == p.exposure) / n
    within = sum(1 for r, p in zip(sample, predictions) if abs(r.exposure - p.exposure) <= 1) / n
    binary = sum(1 for r, p in zip(sample, predictions) if r.exposed == is_exposed(p.exposure)) / n
    confusion = [[0] * 4 for _ in range(4)]
    for r, p in zip(sample, predictions):
        if 0 <= p.exposure <= 3:
            confusion[r.exposure][p.exposure] += 1

    per_field: dict[str, Optional[float]] = {"exposure_level": exact}
    channel_pairs = [(r, p) for r, p in zip(sample, predictions) if p.channel is not None]
    per_field["dominant_channel"] = (
        sum(1 for r, p in channel_pairs if r.channel is p.channel) / len(channel_pairs) if channel_pairs else None
    )
    margin_pairs = [
        (r, p)
        for r, p in zip(sample, predictions)
        if p.margin is not None and r.exposed and is_exposed(p.exposure)
    ]
    per_field["margin_exposed"] = (
        sum(1 for r, p in margin_pairs if r.margin is p.margin) / len(margin_pairs) if margin_pairs else None
    )
    ai_pairs = [(r, p) for r, p in zip(sample, predictions) if p.ai_material is not None]
    per_field["ai_materiality"] = (
        sum(1 for r, p in ai_pairs if r.ai_material == p.ai_material) / len(ai_pairs) if ai_pairs else None
    )
    return HarnessReport(
        n=n,
        exact_level=exact,
        within_one_level=within,
        binary_exposed=binary,
        per_field=per_field,
        confusion=tuple(tuple(row) for row in confusion),
        seed=seed,
        sample_keys=tuple(r.key for r in sample),
    )


# --- distributional checks --------------------------------------------------------------


@dataclass(frozen=True)
class DistributionTables:
    groups: dict[str, dict[str, dict[str, float]]]  # group -> field -> category -> share
    group_sizes: dict[str, int]


def distribution_check(
    dataset: LabelDataset,
    registry: Optional[Mapping[str, CountryContext]] = None,
    group_by: Optional[str] = None,
) -> DistributionTables:
    """Marginal share tables per field (and per registry group when asked).

    Each table is an exact count ratio and sums to 1. The margin table uses the
    normalized margin; a raw-margin table is included alongside, since the two
    differ below the exposure threshold.
    """
    if group_by is not None and group_by not in ("income_group", "region"):
        raise ValidateError(f"unknown grouping field {group_by!r}")

    def group_of(record: TaskLabelRecord) -> str:
        if group_by is None:
            return "overall"
        context = registry.get(record.country) if registry else None
        if context is None:
            return "unregistered"
        value = getattr(context, group_by)
        return value.value if hasattr(value, "value") else str(value)

    grouped: dict[str, list[TaskLabelRecord]] = {}
    for _, record in dataset.items_sorted():
        grouped.setdefault(group_of(record), []).append(record)

    tables: dict[str, dict[str, dict[str, float]]] = {}
    sizes: dict[str, int] = {}
    for group in sorted(grouped):
        records = grouped[group]
        n = len(records)
        sizes[group] = n

        def share_table(values: Sequence) -> dict[str, float]:
            counts = Counter(values)
            return {str(k): counts[k] / n for k in sorted(counts, key=str)}

        tables[group] = {
            "exposure_level": share_table([r.exposure for r in records]),
            "dominant_channel": share_table([r.channel.value for r in records]),
            "margin": share_table([r.margin.value for r in records]),
            "margin_raw": share_table([r.margin_raw.value for r in records]),
            "ai_materiality": share_table([r.ai_material for r in records]),
        }
    return DistributionTables(groups=tables, group_sizes=sizes)
