"""Occupation bridge (task -> SOC -> ISCO) and industry graph (task -> ISIC4
candidate-then-prune), with occupation- and industry-level exposure summaries."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Protocol, Sequence

import numpy as np

from .core import ACTIVE_CHANNELS, Channel, DEFINITE_MARGINS, Margin
from .ingest import LabelDataset, _strip_comments
from ._rng import rng_for


class LinkageError(Exception):
    pass


class ProviderError(Exception):
    """An embedding or voting provider failed (missing fixture, bad output)."""


# --- weights and bridges -------------------------------------------------------


@dataclass(frozen=True)
class TaskWeightMap:
    """Per SOC occupation: normalized (task_id, weight) pairs."""

    weights: dict[str, tuple[tuple[str, float], ...]]

    def __post_init__(self):
        for soc, pairs in self.weights.items():
            if any(w < 0 for _, w in pairs):
                raise LinkageError(f"negative task weight under occupation {soc}")
            total = math.fsum(w for _, w in pairs)
            if abs(total - 1.0) > 1e-9:
                raise LinkageError(f"task weights for occupation {soc} sum to {total}, not 1")

    def occupations(self) -> list[str]:
        return sorted(self.weights)


def uniform_weights(tasks_by_occupation: Mapping[str, Sequence[str]]) -> TaskWeightMap:
    weights = {}
    for soc in sorted(tasks_by_occupation):
        tasks = sorted(tasks_by_occupation[soc])
        weights[soc] = tuple((t, 1.0 / len(tasks)) for t in tasks)
    return TaskWeightMap(weights=weights)


def load_task_weights(path) -> TaskWeightMap:
    """CSV with soc, task_id, weight columns."""
    grouped: dict[str, list[tuple[str, float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(_strip_comments(handle))
        required = {"soc", "task_id", "weight"}
        if reader.fieldnames is None or required - set(reader.fieldnames):
            raise LinkageError("task weight file needs soc, task_id, weight columns")
        for row in reader:
            grouped.setdefault(row["soc"].strip(), []).append((row["task_id"].strip(), float(row["weight"])))
    return TaskWeightMap(weights={soc: tuple(sorted(pairs)) for soc, pairs in sorted(grouped.items())})


@dataclass(frozen=True)
class BridgeShares:
    """Per SOC occupation: (ISCO group, share) pairs; weighted or modal variant."""

    shares: dict[str, tuple[tuple[str, float], ...]]
    variant: str = "weighted"

    def __post_init__(self):
        if self.variant not in ("weighted", "modal"):
            raise LinkageError(f"unknown bridge variant {self.variant!r}")
        for soc, pairs in self.shares.items():
            if any(s < 0 for _, s in pairs):
                raise LinkageError(f"negative bridge share for occupation {soc}")
            total = math.fsum(s for _, s in pairs)
            if abs(total - 1.0) > 1e-9:
                raise LinkageError(f"bridge shares for occupation {soc} sum to {total}, not 1")
            if self.variant == "modal" and [s for _, s in pairs if s > 0] != [1.0]:
                raise LinkageError(f"modal bridge must map occupation {soc} to exactly one group")

    def to_modal(self) -> "BridgeShares":
        """Collapse each occupation onto its largest-share group (ties: smallest id)."""
        modal = {}
        for soc, pairs in self.shares.items():
            best = min(pairs, key=lambda p: (-p[1], p[0]))[0]
            modal[soc] = ((best, 1.0),)
        return BridgeShares(shares=modal, variant="modal")


def load_bridge(path, variant: str = "weighted") -> BridgeShares:
    """CSV with soc, isco, share columns."""
    grouped: dict[str, list[tuple[str, float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(_strip_comments(handle))
        required = {"soc", "isco", "share"}
        if reader.fieldnames is None or required - set(reader.fieldnames):
            raise LinkageError("bridge file needs soc, isco, share columns")
        for row in reader:
            grouped.setdefault(row["soc"].strip(), []).append((row["isco"].strip(), float(row["share"])))
    bridge = BridgeShares(shares={soc: tuple(sorted(pairs)) for soc, pairs in sorted(grouped.items())})
    return bridge.to_modal() if variant == "modal" else bridge


# --- occupation summaries --------------------------------------------------------


@dataclass(frozen=True)
class SocCell:
    """Weighted task aggregates for one occupation in one country."""

    value: float  # weighted mean exposure level
    exposed_share: float
    high_share: float
    margin_shares: dict[Margin, float]  # weighted share of tasks per definite margin
    channel_shares: dict[Channel, float]  # weighted share of tasks per active channel
    ai_material_share: float
    dropped_weight: float  # weight mass on tasks missing from the country's labels

    def within_exposed_margin_share(self, margin: Margin) -> Optional[float]:
        if self.exposed_share <= 0:
            return None
        return self.margin_shares[margin] / self.exposed_share


def soc_summary(
    dataset: LabelDataset,
    iso3: str,
    weights: TaskWeightMap,
) -> dict[str, SocCell]:
    """Per-occupation weighted exposure for one country.

    Weights over tasks missing from the country's labels are renormalized away
    and the dropped mass reported per occupation; an occupation with zero
    usable mass is an error.
    """
    labels = {r.task_id: r for r in dataset.for_country(iso3)}
    if not labels:
        raise LinkageError(f"no labels for country {iso3!r}")
    out: dict[str, SocCell] = {}
    for soc in weights.occupations():
        pairs = [(t, w) for t, w in weights.weights[soc] if t in labels]
        usable = math.fsum(w for _, w in pairs)
        if usable <= 0:
            raise LinkageError(f"occupation {soc} has zero usable weight mass for {iso3}")
        value = math.fsum(w * labels[t].exposure for t, w in pairs) / usable
        exposed = math.fsum(w * (1.0 if labels[t].exposed else 0.0) for t, w in pairs) / usable
        high = math.fsum(w * (1.0 if labels[t].exposure == 3 else 0.0) for t, w in pairs) / usable
        margins = {
            m: math.fsum(w * (1.0 if labels[t].margin is m else 0.0) for t, w in pairs) / usable
            for m in DEFINITE_MARGINS
        }
        channels = {
            c: math.fsum(w * (1.0 if labels[t].channel is c else 0.0) for t, w in pairs) / usable
            for c in ACTIVE_CHANNELS
        }
        ai = math.fsum(w * (1.0 if (labels[t].ai_material and labels[t].exposed) else 0.0) for t, w in pairs) / usable
        out[soc] = SocCell(
            value=value,
            exposed_share=exposed,
            high_share=high,
            margin_shares=margins,
            channel_shares=channels,
            ai_material_share=ai,
            dropped_weight=1.0 - usable,
        )
    return out


def isco_summary(soc_values: Mapping[str, float], bridge: BridgeShares) -> dict[str, float]:
    """Combine per-SOC values into ISCO groups under bridge shares.

    Incoming SOC mass per group is renormalized so results stay in the units of
    the inputs (an identity bridge is an exact pass-through).
    """
    incoming: dict[str, list[tuple[str, float]]] = {}
    for soc in sorted(soc_values):
        if soc not in bridge.shares:
            raise LinkageError(f"occupation {soc} has no bridge row")
        for isco, share in bridge.shares[soc]:
            if share > 0:
                incoming.setdefault(isco, []).append((soc, share))
    out: dict[str, float] = {}
    for isco in sorted(incoming):
        pairs = incoming[isco]
        mass = math.fsum(share for _, share in pairs)
        out[isco] = math.fsum(share * soc_values[soc] for soc, share in pairs) / mass
    return out


# --- providers -------------------------------------------------------------------


class EmbeddingProvider(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


class EdgeVoter(Protocol):
    def vote(self, task_text: str, activity_text: str, ballot: int) -> bool: ...


def _digest(*parts: str) -> str:
    return hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()


class HashEmbedder:
    """Deterministic test double: pseudo-random unit vector seeded by the text."""

    def __init__(self, dim: int = 64):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
        vec = rng_for(seed).standard_normal(self.dim)
        return vec / np.linalg.norm(vec)


class HashVoter:
    """Deterministic test double: pseudo-random ballots with a fixed valid rate."""

    def __init__(self, valid_rate: float = 0.9):
        self.valid_rate = valid_rate

    def vote(self, task_text: str, activity_text: str, ballot: int) -> bool:
        digest = _digest(task_text, activity_text, str(ballot))
        draw = int(digest[:13], 16) / 16**13
        return draw < self.valid_rate


class ReplayEmbedder:
    """Content-addressed replay fixtures: <dir>/<sha256(text)>.json holds the vector."""

    def __init__(self, fixture_dir):
        self.fixture_dir = Path(fixture_dir)

    def embed(self, text: str) -> np.ndarray:
        path = self.fixture_dir / f"{_digest(text)}.json"
        if not path.exists():
            raise ProviderError(f"no embedding fixture for input digest {_digest(text)[:12]}...")
        return np.asarray(json.loads(path.read_text(encoding="utf-8")), dtype=np.float64)

    def record(self, text: str, vector: Sequence[float]) -> None:
        path = self.fixture_dir / f"{_digest(text)}.json"
        path.write_text(json.dumps([float(v) for v in vector]), encoding="utf-8")


class ReplayVoter:
    """Replay fixtures keyed by (task text, activity text, ballot index)."""

    def __init__(self, fixture_dir):
        self.fixture_dir = Path(fixture_dir)

    def _path(self, task_text: str, activity_text: str, ballot: int) -> Path:
        return self.fixture_dir / f"{_digest(task_text, activity_text, str(ballot))}.json"

    def vote(self, task_text: str, activity_text: str, ballot: int) -> bool:
        path = self._path(task_text, activity_text, ballot)
        if not path.exists():
            raise ProviderError(f"no vote fixture for ballot {ballot} on digest {path.stem[:12]}...")
        return bool(json.loads(path.read_text(encoding="utf-8")))

    def record(self, task_text: str, activity_text: str, ballot: int, valid: bool) -> None:
        self._path(task_text, activity_text, ballot).write_text(json.dumps(bool(valid)), encoding="utf-8")


# --- candidate generation and pruning ----------------------------------------------


@dataclass(frozen=True)
class CandidateEdge:
    task_id: str
    isic4: str
    similarity: float


def build_candidates(
    task_texts: Mapping[str, str],
    activity_texts: Mapping[str, str],
    provider: EmbeddingProvider,
    top_k: int = 60,
    floor: float = 0.30,
) -> list[CandidateEdge]:
    """Embedding-retrieved candidate edges: per activity, the ``top_k`` most
    cosine-similar tasks at or above the similarity floor."""
    if top_k < 1:
        raise LinkageError("top_k must be >= 1")
    task_ids = sorted(task_texts)
    vectors = []
    for task_id in task_ids:
        vec = np.asarray(provider.embed(task_texts[task_id]), dtype=np.float64)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise LinkageError(f"zero-norm embedding for task {task_id}")
        vectors.append(vec / norm)
    matrix = np.stack(vectors)

    edges: list[CandidateEdge] = []
    for isic4 in sorted(activity_texts):
        vec = np.asarray(provider.embed(activity_texts[isic4]), dtype=np.float64)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise LinkageError(f"zero-norm embedding for activity {isic4}")
        sims = matrix @ (vec / norm)
        ranked = sorted(zip(task_ids, sims.tolist()), key=lambda p: (-p[1], p[0]))
        for task_id, sim in ranked[:top_k]:
            if sim >= floor:
                edges.append(CandidateEdge(task_id=task_id, isic4=isic4, similarity=sim))
    return edges


@dataclass(frozen=True)
class EdgeRecord:
    task_id: str
    isic4: str
    similarity: float
    votes: tuple[bool, ...]

    @property
    def agreement(self) -> float:
        valid = sum(self.votes)
        return max(valid, len(self.votes) - valid) / len(self.votes)

    @property
    def retained(self) -> bool:
        return sum(self.votes) * 2 > len(self.votes)


@dataclass(frozen=True)
class IndustryGraph:
    """Retained task -> ISIC4 class edges with their vote records."""

    edges: tuple[EdgeRecord, ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        keys = [(e.task_id, e.isic4) for e in self.edges]
        if len(keys) != len(set(keys)):
            raise LinkageError("duplicate edges in industry graph")

    def division(self, isic4: str) -> str:
        override = self.provenance.get("division_map", {})
        return override.get(isic4, isic4[:2])

    def classes(self) -> list[str]:
        return sorted({e.isic4 for e in self.edges})

    def divisions(self) -> list[str]:
        return sorted({self.division(c) for c in self.classes()})

    def tasks_by_class(self) -> dict[str, list[str]]:
        grouped: dict[str, list[str]] = {}
        for edge in sorted(self.edges, key=lambda e: (e.isic4, e.task_id)):
            grouped.setdefault(edge.isic4, []).append(edge.task_id)
        return grouped


@dataclass(frozen=True)
class PruneResult:
    graph: IndustryGraph
    n_candidates: int
    n_retained: int
    mean_agreement: float


def prune_edges(
    candidates: Sequence[CandidateEdge],
    voter: EdgeVoter,
    task_texts: Mapping[str, str],
    activity_texts: Mapping[str, str],
    votes_per_edge: int = 3,
    retries: int = 2,
    provenance: Optional[dict] = None,
) -> PruneResult:
    """Majority-vote pruning of candidate edges.

    An edge is retained iff a strict majority of its ballots is valid; per-edge
    agreement is max(valid, invalid)/votes, and the mean over all candidates is
    reported. A provider failure is retried up to ``retries`` times per ballot.
    """
    if votes_per_edge < 1 or votes_per_edge % 2 == 0:
        raise LinkageError("votes_per_edge must be an odd count >= 1")
    records: list[EdgeRecord] = []
    ordered = sorted(candidates, key=lambda e: (e.isic4, e.task_id))
    for edge in ordered:
        votes = []
        for ballot in range(votes_per_edge):
            last_error: Optional[Exception] = None
            for _ in range(retries + 1):
                try:
                    votes.append(bool(voter.vote(task_texts[edge.task_id], activity_texts[edge.isic4], ballot)))
                    last_error = None
                    break
                except ProviderError as exc:
                    last_error = exc
            if last_error is not None:
                raise ProviderError(
                    f"voter failed {retries + 1} times on edge ({edge.task_id}, {edge.isic4}): {last_error}"
                )
        records.append(EdgeRecord(edge.task_id, edge.isic4, edge.similarity, tuple(votes)))
    mean_agreement = math.fsum(r.agreement for r in records) / len(records) if records else 0.0
    retained = tuple(r for r in records if r.retained)
    meta = dict(provenance or {})
    meta.update({"votes_per_edge": votes_per_edge, "n_candidates": len(records), "n_retained": len(retained)})
    return PruneResult(
        graph=IndustryGraph(edges=retained, provenance=meta),
        n_candidates=len(records),
        n_retained=len(retained),
        mean_agreement=mean_agreement,
    )


def tally_votes(
    vote_log: Sequence[tuple[str, str, Sequence[bool]]],
    similarities: Optional[Mapping[tuple[str, str], float]] = None,
    provenance: Optional[dict] = None,
) -> PruneResult:
    """Prune from an existing vote log of (task_id, isic4, ballots) triples."""
    records = []
    for task_id, isic4, ballots in sorted(vote_log, key=lambda e: (e[1], e[0])):
        sim = similarities.get((task_id, isic4), float("nan")) if similarities else float("nan")
        records.append(EdgeRecord(task_id, isic4, sim, tuple(bool(b) for b in ballots)))
    if not records:
        raise LinkageError("empty vote log")
    mean_agreement = math.fsum(r.agreement for r in records) / len(records)
    retained = tuple(r for r in records if r.retained)
    meta = dict(provenance or {})
    meta.update({"n_candidates": len(records), "n_retained": len(retained)})
    return PruneResult(
        graph=IndustryGraph(edges=retained, provenance=meta),
        n_candidates=len(records),
        n_retained=len(retained),
        mean_agreement=mean_agreement,
    )


# --- graph persistence ---------------------------------------------------------------


def save_graph(graph: IndustryGraph, path) -> None:
    lines = [json.dumps({"meta": graph.provenance}, sort_keys=True, separators=(",", ":"))]
    for edge in sorted(graph.edges, key=lambda e: (e.isic4, e.task_id)):
        lines.append(
            json.dumps(
                {
                    "task_id": edge.task_id,
                    "isic4": edge.isic4,
                    "similarity": edge.similarity,
                    "votes": list(edge.votes),
                },
                separators=(",", ":"),
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_graph(path) -> IndustryGraph:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise LinkageError(f"empty graph file {path}")
    head = json.loads(lines[0])
    if "meta" not in head:
        raise LinkageError("graph file missing meta line")
    edges = []
    for line in lines[1:]:
        if not line.strip():
            continue
        obj = json.loads(line)
        edges.append(
            EdgeRecord(
                task_id=obj["task_id"],
                isic4=obj["isic4"],
                similarity=float(obj["similarity"]),
                votes=tuple(bool(v) for v in obj["votes"]),
            )
        )
    return IndustryGraph(edges=tuple(edges), provenance=head["meta"])


# --- industry summaries -----------------------------------------------------------------


@dataclass(frozen=True)
class IndustryCell:
    value: float
    exposed_share: float
    margin_shares_within: Optional[dict[Margin, float]]
    ai_material_share_exposed: Optional[float]
    n_tasks: int


@dataclass(frozen=True)
class IndustrySummary:
    classes: dict[str, IndustryCell]
    divisions: dict[str, IndustryCell]
    missing_tasks: int
    skipped_classes: tuple[str, ...]
    skipped_divisions: tuple[str, ...]


def industry_summary(dataset: LabelDataset, iso3: str, graph: IndustryGraph) -> IndustrySummary:
    """Class values are unweighted means over linked tasks; division values are
    unweighted means over the division's retained classes."""
    if not graph.edges:
        raise LinkageError("industry graph has no retained edges")
    labels = {r.task_id: r for r in dataset.for_country(iso3)}
    if not labels:
        raise LinkageError(f"no labels for country {iso3!r}")

    classes: dict[str, IndustryCell] = {}
    skipped_classes = []
    missing = 0
    for isic4, task_ids in graph.tasks_by_class().items():
        present = [labels[t] for t in task_ids if t in labels]
        missing += len(task_ids) - len(present)
        if not present:
            skipped_classes.append(isic4)
            continue
        n = len(present)
        exposed = [r for r in present if r.exposed]
        known = [r for r in exposed if r.margin in DEFINITE_MARGINS]
        classes[isic4] = IndustryCell(
            value=math.fsum(r.exposure for r in present) / n,
            exposed_share=len(exposed) / n,
            margin_shares_within=(
                {m: sum(1 for r in known if r.margin is m) / len(known) for m in DEFINITE_MARGINS}
                if known
                else None
            ),
            ai_material_share_exposed=(
                sum(1 for r in exposed if r.ai_material) / len(exposed) if exposed else None
            ),
            n_tasks=n,
        )

    divisions: dict[str, IndustryCell] = {}
    skipped_divisions = []
    by_division: dict[str, list[str]] = {}
    for isic4 in graph.classes():
        by_division.setdefault(graph.division(isic4), []).append(isic4)
    for division in sorted(by_division):
        cells = [classes[c] for c in sorted(by_division[division]) if c in classes]
        if not cells:
            skipped_divisions.append(division)
            continue
        divisions[division] = _mean_cell(cells)
    if not divisions:
        raise LinkageError(f"no division has a retained class with labels for {iso3}")
    return IndustrySummary(
        classes=classes,
        divisions=divisions,
        missing_tasks=missing,
        skipped_classes=tuple(skipped_classes),
        skipped_divisions=tuple(skipped_divisions),
    )


def _mean_cell(cells: Sequence[IndustryCell]) -> IndustryCell:
    def mean_of(values: list[float]) -> Optional[float]:
        return math.fsum(values) / len(values) if values else None

    within_lists = {m: [c.margin_shares_within[m] for c in cells if c.margin_shares_within] for m in DEFINITE_MARGINS}
    any_within = any(within_lists[m] for m in DEFINITE_MARGINS)
    ai_values = [c.ai_material_share_exposed for c in cells if c.ai_material_share_exposed is not None]
    return IndustryCell(
        value=math.fsum(c.value for c in cells) / len(cells),
        exposed_share=math.fsum(c.exposed_share for c in cells) / len(cells),
        margin_shares_within=({m: mean_of(within_lists[m]) for m in DEFINITE_MARGINS} if any_within else None),
        ai_material_share_exposed=mean_of(ai_values),
        n_tasks=sum(c.n_tasks for c in cells),
    )


# --- margin pockets --------------------------------------------------------------------


@dataclass(frozen=True)
class Pocket:
    unit: str
    exposed_share: float
    margin_share: float

    @property
    def product(self) -> float:
        return self.exposed_share * self.margin_share


def margin_pockets(
    units: Mapping[str, tuple[float, float]],
    top_n: Optional[int] = None,
) -> list[Pocket]:
    """Rank units by exposed share x within-exposed margin share, descending;
    ties break on the unit id."""
    pockets = [Pocket(unit, exp, margin) for unit, (exp, margin) in units.items()]
    pockets.sort(key=lambda p: (-p.product, p.unit))
    return pockets if top_n is None else pockets[:top_n]
