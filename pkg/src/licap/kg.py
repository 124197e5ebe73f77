"""Knowledge graph, importance labels, and node feature loading.

File formats are UTF-8, tab-separated; lines starting with ``#`` and blank
lines are skipped. Identifiers are arbitrary strings interned to dense
integer ids in first-seen order, which makes runs reproducible from the
same input file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import DataError, ParseError


def _data_lines(stream: Iterable[str]) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, stripped content) for non-comment lines."""
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line


@dataclass(frozen=True)
class KnowledgeGraph:
    """Immutable directed multigraph with typed edges.

    ``edges`` holds (head, predicate, tail) triples of dense integer ids.
    Parallel edges between the same node pair are allowed and preserved.
    ``adjacency`` lists, per node, the incoming (neighbor, predicate) pairs
    used for message passing; it is only populated on augmented graphs.
    """

    node_count: int
    edges: tuple[tuple[int, int, int], ...]
    predicate_count: int
    node_names: tuple[str, ...] | None = None
    predicate_names: tuple[str, ...] | None = None
    adjacency: tuple[tuple[tuple[int, int], ...], ...] | None = None
    augmented: bool = False
    _name_index: dict[str, int] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        for h, p, t in self.edges:
            if not (0 <= h < self.node_count and 0 <= t < self.node_count):
                raise DataError(f"edge ({h},{p},{t}) references unknown node")
            if not 0 <= p < self.predicate_count:
                raise DataError(f"edge ({h},{p},{t}) references unknown predicate")
        if self.node_names is not None:
            self._name_index.update(
                (name, i) for i, name in enumerate(self.node_names)
            )

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def node_id(self, name: str) -> int:
        """Resolve an identifier through the interning table."""
        if self.node_names is None:
            raise DataError("graph carries no node names")
        try:
            return self._name_index[name]
        except KeyError:
            raise DataError(f"unknown node identifier {name!r}") from None

    def node_name(self, node: int) -> str:
        if self.node_names is None:
            return str(node)
        return self.node_names[node]

    def message_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Canonical flat (dst, src, predicate) arrays for message passing.

        Entries are ordered by (dst, src, predicate) regardless of how the
        adjacency lists are stored, so reductions over them are bitwise
        reproducible.
        """
        if self.adjacency is None:
            raise DataError("graph is not augmented for message passing")
        dst, src, pred = [], [], []
        for i, entries in enumerate(self.adjacency):
            for neighbor, predicate in sorted(entries):
                dst.append(i)
                src.append(neighbor)
                pred.append(predicate)
        return (
            np.asarray(dst, dtype=np.int64),
            np.asarray(src, dtype=np.int64),
            np.asarray(pred, dtype=np.int64),
        )


def load_graph(triples_text: Iterable[str]) -> KnowledgeGraph:
    """Parse `head<TAB>predicate<TAB>tail` lines into a KnowledgeGraph."""
    node_ids: dict[str, int] = {}
    predicate_ids: dict[str, int] = {}
    edges: list[tuple[int, int, int]] = []

    def intern(table: dict[str, int], name: str) -> int:
        if name not in table:
            table[name] = len(table)
        return table[name]

    for lineno, line in _data_lines(triples_text):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(
                f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}"
            )
        head, predicate, tail = parts
        edges.append(
            (
                intern(node_ids, head),
                intern(predicate_ids, predicate),
                intern(node_ids, tail),
            )
        )

    if not edges:
        raise ParseError("no edges found in triples input")

    return KnowledgeGraph(
        node_count=len(node_ids),
        edges=tuple(edges),
        predicate_count=len(predicate_ids),
        node_names=tuple(node_ids),
        predicate_names=tuple(predicate_ids),
    )


def augment_for_message_passing(kg: KnowledgeGraph) -> KnowledgeGraph:
    """Add reverse and self edges so every node has a defined neighborhood.

    Each original edge (h, p, t) gains a reverse copy (t, p + P, h), and every
    node gains a self edge with the dedicated predicate id 2P, where P is the
    original predicate count. Direction thus stays visible to the encoder as
    relational information. Must not be applied twice.
    """
    if kg.augmented:
        raise DataError("graph is already augmented for message passing")

    p_orig = kg.predicate_count
    edges = list(kg.edges)
    edges.extend((t, p + p_orig, h) for h, p, t in kg.edges)
    edges.extend((i, 2 * p_orig, i) for i in range(kg.node_count))

    adjacency: list[list[tuple[int, int]]] = [[] for _ in range(kg.node_count)]
    for h, p, t in edges:
        adjacency[t].append((h, p))

    predicate_names = None
    if kg.predicate_names is not None:
        predicate_names = (
            kg.predicate_names
            + tuple(f"{name}__rev" for name in kg.predicate_names)
            + ("__self__",)
        )

    return KnowledgeGraph(
        node_count=kg.node_count,
        edges=tuple(edges),
        predicate_count=2 * p_orig + 1,
        node_names=kg.node_names,
        predicate_names=predicate_names,
        adjacency=tuple(tuple(sorted(entries)) for entries in adjacency),
        augmented=True,
    )


@dataclass(frozen=True)
class LabelSet:
    """Importance scores for the labelled node subset.

    ``entries`` maps node id to ln(1 + raw value); ``raw_entries`` keeps the
    collected raw values. The log transform keeps heavily skewed importance
    values (pageviews, citations) on a workable scale.
    """

    entries: dict[int, float]
    raw_entries: dict[int, float]

    def __post_init__(self) -> None:
        for node, score in self.entries.items():
            if not math.isfinite(score) or score < 0:
                raise DataError(f"node {node} has invalid score {score}")

    def __len__(self) -> int:
        return len(self.entries)

    def nodes(self) -> list[int]:
        """Labelled node ids in ascending order."""
        return sorted(self.entries)

    def nodes_by_descending_score(self) -> list[int]:
        """Labelled node ids from highest to lowest score, ties by id."""
        return sorted(self.entries, key=lambda n: (-self.entries[n], n))

    def scores(self, nodes: Iterable[int]) -> np.ndarray:
        return np.array([self.entries[n] for n in nodes], dtype=np.float64)

    @classmethod
    def from_raw(cls, raw: dict[int, float]) -> "LabelSet":
        return cls(
            entries={n: math.log1p(v) for n, v in raw.items()},
            raw_entries=dict(raw),
        )


def load_labels(labels_text: Iterable[str], kg: KnowledgeGraph) -> LabelSet:
    """Parse `node<TAB>raw_value` lines; scores become ln(1 + raw_value)."""
    raw: dict[int, float] = {}
    for lineno, line in _data_lines(labels_text):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(
                f"line {lineno}: expected 2 tab-separated fields, got {len(parts)}"
            )
        name, value_text = parts
        node = kg.node_id(name)
        if node in raw:
            raise DataError(f"line {lineno}: duplicate label for node {name!r}")
        try:
            value = float(value_text)
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric value {value_text!r}")
        if not math.isfinite(value) or value < 0:
            raise DataError(f"line {lineno}: raw value must be >= 0, got {value}")
        raw[node] = value
    if not raw:
        raise ParseError("no labels found in labels input")
    return LabelSet.from_raw(raw)


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense initial node embeddings, one row per node."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("feature matrix contains NaN or Inf entries")
        object.__setattr__(self, "values", values)

    @property
    def node_count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def load_features(features_text: Iterable[str], kg: KnowledgeGraph) -> FeatureMatrix:
    """Parse `node<TAB>v1,v2,...,vF` lines into a node_count x F matrix."""
    rows: dict[int, np.ndarray] = {}
    dim: int | None = None
    for lineno, line in _data_lines(features_text):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(
                f"line {lineno}: expected 2 tab-separated fields, got {len(parts)}"
            )
        name, vector_text = parts
        node = kg.node_id(name)
        if node in rows:
            raise DataError(f"line {lineno}: duplicate features for node {name!r}")
        try:
            vector = np.array(
                [float(v) for v in vector_text.split(",")], dtype=np.float64
            )
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric feature entry")
        if dim is None:
            dim = vector.size
        elif vector.size != dim:
            raise ParseError(
                f"line {lineno}: ragged row, expected {dim} values, got {vector.size}"
            )
        rows[node] = vector

    missing = [kg.node_name(i) for i in range(kg.node_count) if i not in rows]
    if missing:
        raise DataError(f"missing features for nodes: {', '.join(missing[:5])}")

    matrix = np.stack([rows[i] for i in range(kg.node_count)])
    return FeatureMatrix(matrix)


def write_embeddings(path: str, kg: KnowledgeGraph, matrix: np.ndarray) -> None:
    """Write a `node<TAB>v1,v2,...` TSV with round-trip float precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(matrix.shape[0]):
            row = ",".join(f"{v:.17g}" for v in matrix[i])
            fh.write(f"{kg.node_name(i)}\t{row}\n")
