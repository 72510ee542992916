"""Canonical in-memory representations of abundance data and taxonomic trees."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Sequence, Tuple

from .errors import DomainError, ParseError

__all__ = [
    "PartitionData",
    "TaxonNode",
    "TaxonomicDataset",
    "ObservationStream",
    "ingest_abundance_csv",
    "write_abundance_csv",
    "ingest_taxonomy_csv",
    "write_taxonomy_csv",
    "accumulate",
    "stream_to_partition",
    "stream_to_taxonomy",
]

# An observation stream is any ordered sequence of taxon labels, or of
# label tuples for taxonomic data.
ObservationStream = Sequence[Hashable]


@dataclass(frozen=True)
class PartitionData:
    """Abundance multiset with derived sufficient statistics.

    abundances are stored sorted in descending order; the order carries no
    meaning (exchangeability), sorting just makes serialization deterministic.
    """

    abundances: Tuple[int, ...]
    n: int
    k: int
    freq_counts: Dict[int, int]

    @classmethod
    def from_abundances(cls, counts: Iterable[int]) -> "PartitionData":
        abundances = tuple(sorted((int(c) for c in counts), reverse=True))
        if not abundances:
            raise DomainError("at least one taxon is required")
        if abundances[-1] < 1:
            raise DomainError("abundances must be positive integers")
        freq = dict(sorted(Counter(abundances).items()))
        return cls(abundances=abundances, n=sum(abundances), k=len(abundances),
                   freq_counts=freq)

    @classmethod
    def from_freq_counts(cls, freq_counts: Dict[int, int]) -> "PartitionData":
        counts: List[int] = []
        for r, m_r in freq_counts.items():
            if r < 1 or m_r < 0:
                raise DomainError("freq_counts must map positive sizes to counts >= 0")
            counts.extend([int(r)] * int(m_r))
        return cls.from_abundances(counts)

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k,
                "freq_counts": {str(r): m for r, m in self.freq_counts.items()}}


@dataclass
class TaxonNode:
    """A node of the taxonomy tree: a taxon with its sample count and children."""

    label: str
    count: int = 0
    children: Dict[str, "TaxonNode"] = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"label": self.label, "count": self.count}
        if self.children:
            out["children"] = [c.to_json() for c in self.children.values()]
        return out


@dataclass
class TaxonomicDataset:
    """Rooted L-level tree of taxon labels with per-node counts."""

    levels: int
    top: Dict[str, TaxonNode]

    @property
    def n(self) -> int:
        return sum(node.count for node in self.top.values())

    def k_per_level(self) -> List[int]:
        ks = []
        nodes = list(self.top.values())
        for _ in range(self.levels):
            ks.append(len(nodes))
            nodes = [c for node in nodes for c in node.children.values()]
        return ks

    def parents_at_level(self, level: int) -> List[TaxonNode]:
        """Nodes at depth level-1 (1-based), i.e. the parents of level `level`."""
        if not 2 <= level <= self.levels:
            raise DomainError(f"level must be in [2, {self.levels}]")
        nodes = list(self.top.values())
        for _ in range(level - 2):
            nodes = [c for node in nodes for c in node.children.values()]
        return nodes

    def validate(self) -> None:
        seen: Dict[Tuple[int, str], str] = {}

        def walk(node: TaxonNode, depth: int, parent: str) -> None:
            key = (depth, node.label)
            if key in seen and seen[key] != parent:
                raise DomainError(
                    f"label {node.label!r} appears under two parents "
                    f"({seen[key]!r} and {parent!r}) at level {depth}")
            seen[key] = parent
            if node.children:
                total = sum(c.count for c in node.children.values())
                if total != node.count:
                    raise DomainError(
                        f"node {node.label!r} count {node.count} != children sum {total}")
                for c in node.children.values():
                    walk(c, depth + 1, node.label)
            elif depth != self.levels:
                raise DomainError(f"leaf {node.label!r} at depth {depth} != {self.levels}")
            elif node.count < 1:
                raise DomainError(f"leaf {node.label!r} has count {node.count} < 1")

        for node in self.top.values():
            walk(node, 1, "")

    def to_json(self) -> dict:
        return {"levels": self.levels, "n": self.n,
                "tree": [node.to_json() for node in self.top.values()]}


def ingest_abundance_csv(path: str) -> PartitionData:
    """Read a `taxon,count` CSV into a PartitionData."""
    counts: Dict[str, int] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file")
        if [h.strip().lower() for h in header] != ["taxon", "count"]:
            raise ParseError(f"{path}: line 1: expected header 'taxon,count'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            taxon = row[0].strip()
            try:
                count = int(row[1])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: count {row[1]!r} is not an integer")
            if count < 1:
                raise ParseError(f"{path}: line {lineno}: count must be positive")
            if taxon in counts:
                raise ParseError(f"{path}: line {lineno}: duplicate taxon {taxon!r}")
            counts[taxon] = count
    if not counts:
        raise ParseError(f"{path}: no data rows")
    return PartitionData.from_abundances(counts.values())


def write_abundance_csv(data: PartitionData, path: str) -> None:
    """Serialize abundances with synthetic taxon ids, largest first."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["taxon", "count"])
        width = len(str(data.k))
        for i, c in enumerate(data.abundances, start=1):
            writer.writerow([f"t{i:0{width}d}", c])


def ingest_taxonomy_csv(path: str, levels: int) -> TaxonomicDataset:
    """Read a `level1,...,levelL,count` CSV into a TaxonomicDataset."""
    if levels < 2:
        raise DomainError("a taxonomy needs at least 2 levels")
    expected = [f"level{i}" for i in range(1, levels + 1)] + ["count"]
    dataset = TaxonomicDataset(levels=levels, top={})
    parent_of: Dict[Tuple[int, str], str] = {}
    seen_paths = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file")
        if [h.strip().lower() for h in header] != expected:
            raise ParseError(f"{path}: line 1: expected header {','.join(expected)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != levels + 1:
                raise ParseError(f"{path}: line {lineno}: expected {levels + 1} fields")
            labels = [c.strip() for c in row[:levels]]
            if any(not lab for lab in labels):
                raise ParseError(f"{path}: line {lineno}: empty taxon label")
            try:
                count = int(row[levels])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: count {row[levels]!r} is not an integer")
            if count < 1:
                raise ParseError(f"{path}: line {lineno}: count must be positive")
            path_key = tuple(labels)
            if path_key in seen_paths:
                raise ParseError(f"{path}: line {lineno}: duplicate row for {'/'.join(labels)}")
            seen_paths.add(path_key)
            parent = ""
            for depth, label in enumerate(labels, start=1):
                key = (depth, label)
                if key in parent_of and parent_of[key] != parent:
                    raise DomainError(
                        f"{path}: line {lineno}: label {label!r} at level {depth} is "
                        f"nested under both {parent_of[key]!r} and {parent!r}")
                parent_of[key] = parent
                parent = label
            node_map = dataset.top
            node = None
            for label in labels:
                node = node_map.setdefault(label, TaxonNode(label=label))
                node.count += count
                node_map = node.children
    if not dataset.top:
        raise ParseError(f"{path}: no data rows")
    dataset.validate()
    return dataset


def write_taxonomy_csv(dataset: TaxonomicDataset, path: str) -> None:
    rows: List[Tuple] = []

    def walk(node: TaxonNode, prefix: Tuple[str, ...]) -> None:
        prefix = prefix + (node.label,)
        if node.children:
            for c in sorted(node.children.values(), key=lambda x: x.label):
                walk(c, prefix)
        else:
            rows.append(prefix + (node.count,))

    for node in sorted(dataset.top.values(), key=lambda x: x.label):
        walk(node, ())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"level{i}" for i in range(1, dataset.levels + 1)] + ["count"])
        writer.writerows(rows)


def accumulate(stream: ObservationStream) -> List[Tuple[int, int]]:
    """Running distinct-count trajectory [(i, K_i)] of an observation stream."""
    if len(stream) == 0:
        raise DomainError("stream must be nonempty")
    seen = set()
    out = []
    for i, label in enumerate(stream, start=1):
        seen.add(label)
        out.append((i, len(seen)))
    return out


def stream_to_partition(stream: ObservationStream) -> PartitionData:
    return PartitionData.from_abundances(Counter(stream).values())


def stream_to_taxonomy(stream: Sequence[Tuple[str, ...]], levels: int) -> TaxonomicDataset:
    """Reduce a stream of label tuples to an aggregated taxonomy tree."""
    dataset = TaxonomicDataset(levels=levels, top={})
    for labels in stream:
        if len(labels) != levels:
            raise DomainError(f"tuple {labels!r} does not have {levels} levels")
        node_map = dataset.top
        for label in labels:
            node = node_map.setdefault(label, TaxonNode(label=str(label)))
            node.count += 1
            node_map = node.children
    dataset.validate()
    return dataset


def partition_to_json_str(data: PartitionData) -> str:
    return json.dumps(data.to_json(), indent=2, sort_keys=True)
