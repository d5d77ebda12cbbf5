"""Knowledge-graph triple files: loading, vocabularies, popularity, statistics.

The on-disk convention is the 3-column TSV used by the FB15k237 / WN18RR
distributions: ``head<TAB>relation<TAB>tail``, UTF-8, one triple per line,
LF or CRLF.  Labels are opaque byte strings compared exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ParseError, ValidationError

logger = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "valid", "test")


@dataclass(frozen=True)
class Triple:
    """One (head, relation, tail) fact, by label."""

    head: str
    relation: str
    tail: str

    def __post_init__(self):
        for name in ("head", "relation", "tail"):
            if not getattr(self, name):
                raise ValidationError(f"triple has empty {name}: {self!r}")


@dataclass
class TripleSet:
    """Triples from one split, deduplicated, in file order."""

    triples: list[Triple]
    split: str = ""
    duplicates_dropped: int = 0

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)


def load_split(path: str | Path, split: str = "") -> TripleSet:
    """Parse one triple file.

    Empty lines are skipped; exact duplicate lines are dropped with a
    warning count.  A line with the wrong field count or an empty field
    raises ParseError naming the line number.
    """
    path = Path(path)
    triples: list[Triple] = []
    seen: set[tuple[str, str, str]] = set()
    dropped = 0
    with path.open("r", encoding="utf-8", newline=None) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(
                    f"expected 3 tab-separated fields, got {len(parts)}",
                    path=str(path),
                    line=lineno,
                )
            head, relation, tail = (p.strip() for p in parts)
            if not (head and relation and tail):
                raise ParseError(
                    "empty field after whitespace trimming",
                    path=str(path),
                    line=lineno,
                )
            key = (head, relation, tail)
            if key in seen:
                dropped += 1
                continue
            seen.add(key)
            triples.append(Triple(head, relation, tail))
    if dropped:
        logger.warning("%s: dropped %d duplicate triple line(s)", path, dropped)
    return TripleSet(triples, split=split, duplicates_dropped=dropped)


def write_triples(triples: Iterable[Triple], path: str | Path) -> None:
    """Serialize triples back to the 3-column TSV convention."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as handle:
        for t in triples:
            handle.write(f"{t.head}\t{t.relation}\t{t.tail}\n")


class KnowledgeGraph:
    """Entity/relation vocabularies plus the three splits as id-triples.

    Ids are dense integers assigned in first-appearance order scanning
    train, then valid, then test (head, then relation, then tail within
    a triple), so two loads of the same files yield identical id maps
    and score-row indices stay stable.
    """

    def __init__(
        self,
        entity_labels: list[str],
        relation_labels: list[str],
        train: np.ndarray,
        valid: np.ndarray,
        test: np.ndarray,
    ):
        self.entity_labels = entity_labels
        self.relation_labels = relation_labels
        self.entity_ids = {label: i for i, label in enumerate(entity_labels)}
        self.relation_ids = {label: i for i, label in enumerate(relation_labels)}
        self.train = train
        self.valid = valid
        self.test = test
        # lazily built (relation, known-entity) -> candidate index; see ranking.filter_set
        self._filter_index = None

    @property
    def n_entities(self) -> int:
        return len(self.entity_labels)

    @property
    def n_relations(self) -> int:
        return len(self.relation_labels)

    def split(self, name: str) -> np.ndarray:
        if name not in SPLIT_NAMES:
            raise ValidationError(f"unknown split {name!r}; expected one of {SPLIT_NAMES}")
        return getattr(self, name)


def _empty_ids() -> np.ndarray:
    return np.empty((0, 3), dtype=np.int64)


def build_graph(train: TripleSet, valid: TripleSet, test: TripleSet) -> KnowledgeGraph:
    """Build vocabularies over all splits and store splits by id.

    Duplicate triples within a split are dropped (first occurrence wins),
    keeping the no-duplicates invariant even for hand-built TripleSets.
    """
    entity_labels: list[str] = []
    relation_labels: list[str] = []
    entity_ids: dict[str, int] = {}
    relation_ids: dict[str, int] = {}

    def entity_id(label: str) -> int:
        eid = entity_ids.get(label)
        if eid is None:
            eid = len(entity_labels)
            entity_ids[label] = eid
            entity_labels.append(label)
        return eid

    def relation_id(label: str) -> int:
        rid = relation_ids.get(label)
        if rid is None:
            rid = len(relation_labels)
            relation_ids[label] = rid
            relation_labels.append(label)
        return rid

    split_arrays: list[np.ndarray] = []
    for triple_set in (train, valid, test):
        rows: list[tuple[int, int, int]] = []
        seen: set[tuple[int, int, int]] = set()
        for t in triple_set:
            row = (entity_id(t.head), relation_id(t.relation), entity_id(t.tail))
            if row in seen:
                continue
            seen.add(row)
            rows.append(row)
        split_arrays.append(np.array(rows, dtype=np.int64) if rows else _empty_ids())

    return KnowledgeGraph(entity_labels, relation_labels, *split_arrays)


@dataclass(frozen=True)
class PopularityIndex:
    """Per-entity count of training triples the entity appears in.

    A self-loop triple contributes exactly 1 to its entity (triples are
    counted, not slot occurrences); entities seen only in valid/test
    have count 0.
    """

    counts: np.ndarray  # int64, length n_entities

    def __getitem__(self, entity_id: int) -> int:
        return int(self.counts[entity_id])

    def get(self, entity_id: int, default: int = 0) -> int:
        if 0 <= entity_id < len(self.counts):
            return int(self.counts[entity_id])
        return default

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def max(self) -> int:
        return int(self.counts.max()) if len(self.counts) else 0


def compute_popularity(graph: KnowledgeGraph) -> PopularityIndex:
    """Count, per entity, the training triples it appears in."""
    n = graph.n_entities
    if len(graph.train) == 0:
        return PopularityIndex(np.zeros(n, dtype=np.int64))
    heads = graph.train[:, 0]
    tails = graph.train[:, 2]
    counts = np.bincount(heads, minlength=n)
    counts += np.bincount(tails[tails != heads], minlength=n)
    return PopularityIndex(counts.astype(np.int64))


@dataclass(frozen=True)
class DatasetStats:
    """The five summary statistics of a dataset's training split."""

    n_entities: int
    n_relations: int
    n_triples: int
    delta_avg: float  # full precision; display rounds to one decimal
    delta_max: int
    delta_avg_defined: bool = True

    def to_json_dict(self) -> dict:
        out = {
            "n_entities": self.n_entities,
            "n_relations": self.n_relations,
            "n_triples": self.n_triples,
            "delta_avg": self.delta_avg,
            "delta_max": self.delta_max,
        }
        if not self.delta_avg_defined:
            out["delta_avg_defined"] = False
        return out

    def to_text(self) -> str:
        rows = [
            ("n_entities", f"{self.n_entities:,}"),
            ("n_relations", f"{self.n_relations:,}"),
            ("n_triples", f"{self.n_triples:,}"),
            ("delta_avg", f"{self.delta_avg:.1f}" if self.delta_avg_defined else "undefined"),
            ("delta_max", f"{self.delta_max:,}"),
        ]
        width = max(len(v) for _, v in rows)
        return "\n".join(f"{name:<12} {value:>{width}}" for name, value in rows)


def dataset_stats(graph: KnowledgeGraph, pop: PopularityIndex) -> DatasetStats:
    """Summarize the training split: |E|, |R|, |T|, mean and max popularity."""
    n_entities = graph.n_entities
    if n_entities == 0:
        return DatasetStats(0, graph.n_relations, len(graph.train), 0.0, 0,
                            delta_avg_defined=False)
    return DatasetStats(
        n_entities=n_entities,
        n_relations=graph.n_relations,
        n_triples=len(graph.train),
        delta_avg=pop.total / n_entities,
        delta_max=pop.max,
    )


def load_dataset(directory: str | Path,
                 filenames: Sequence[str] = ("train.txt", "valid.txt", "test.txt"),
                 ) -> tuple[KnowledgeGraph, PopularityIndex]:
    """Load the community train/valid/test layout and index popularity."""
    directory = Path(directory)
    sets = [load_split(directory / fname, split=split)
            for fname, split in zip(filenames, SPLIT_NAMES)]
    graph = build_graph(*sets)
    return graph, compute_popularity(graph)


def export_vocabulary(graph: KnowledgeGraph, path: str | Path) -> None:
    """Write the entity vocabulary as ``label<TAB>id`` lines in id order.

    Score-file producers use this export to fix the entity order of
    their dense score rows.
    """
    with Path(path).open("w", encoding="utf-8", newline="\n") as handle:
        for eid, label in enumerate(graph.entity_labels):
            handle.write(f"{label}\t{eid}\n")
