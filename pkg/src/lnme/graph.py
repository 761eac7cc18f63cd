"""Channel-graph model: lnd-style JSON and edge-list ingestion, plus a
seeded preferential-attachment generator for desk-scale experiments."""

from __future__ import annotations

import csv
import io
import json
import random
from collections import Counter
from dataclasses import dataclass

EDGE_LIST_HEADER = ("node_a", "node_b", "capacity_sat")

DEFAULT_SYNTHETIC_CAPACITY_SAT = 4_500_000  # roughly the network-wide average


class GraphError(ValueError):
    """A graph document violates the ingestion contract."""


@dataclass(frozen=True)
class Channel:
    """Undirected capacity-weighted edge; endpoints are dense node indices."""

    id: str
    node1: int
    node2: int
    capacity: int

    def other(self, node: int) -> int:
        return self.node2 if node == self.node1 else self.node1


class LnGraph:
    """Immutable channel graph.

    Node labels (lnd pubkeys or synthetic names) are canonicalized to dense
    indices 0..n-1 in first-appearance order. Parallel channels between the
    same pair stay distinct; self-loops are rejected. Instances are safe to
    share across concurrent readers.
    """

    def __init__(self, labels, channels):
        self.labels: list[str] = list(labels)
        self.index: dict[str, int] = {lab: i for i, lab in enumerate(self.labels)}
        if len(self.index) != len(self.labels):
            raise GraphError("duplicate node label")
        self.channels: list[Channel] = list(channels)
        adjacency: list[list[int]] = [[] for _ in self.labels]
        for ci, ch in enumerate(self.channels):
            if not (0 <= ch.node1 < len(self.labels)) or not (0 <= ch.node2 < len(self.labels)):
                raise GraphError(f"channel {ch.id!r} references an unknown node")
            if ch.node1 == ch.node2:
                raise GraphError(f"self-loop channel {ch.id!r}")
            if ch.capacity < 0:
                raise GraphError(f"negative capacity on channel {ch.id!r}")
            adjacency[ch.node1].append(ci)
            adjacency[ch.node2].append(ci)
        self.adjacency: list[list[int]] = adjacency

    @property
    def node_count(self) -> int:
        return len(self.labels)

    @property
    def channel_count(self) -> int:
        return len(self.channels)

    def degree(self, node: int) -> int:
        return len(self.adjacency[node])

    def __repr__(self):
        return f"LnGraph(nodes={self.node_count}, channels={self.channel_count})"


def parse_lnd_graph(document: str) -> LnGraph:
    """Parse an lnd describegraph-style JSON document.

    Expects top-level ``nodes`` (objects with ``pub_key``) and ``edges``
    (objects with ``node1_pub``, ``node2_pub``, ``capacity``, ``channel_id``).
    Unknown fields are ignored; nodes without channels are retained.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise GraphError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise GraphError("document must be a JSON object")
    nodes = doc.get("nodes")
    edges = doc.get("edges")
    if not isinstance(nodes, list) or not isinstance(edges, list):
        raise GraphError("document must contain top-level 'nodes' and 'edges' arrays")
    labels: list[str] = []
    for node in nodes:
        pub = node.get("pub_key") if isinstance(node, dict) else None
        if not pub:
            raise GraphError("node entry without pub_key")
        labels.append(pub)
    index = {lab: i for i, lab in enumerate(labels)}
    if len(index) != len(labels):
        raise GraphError("duplicate pub_key in nodes array")
    channels: list[Channel] = []
    for pos, edge in enumerate(edges):
        cid = str(edge.get("channel_id", f"edge{pos}"))
        for key in ("node1_pub", "node2_pub"):
            if edge.get(key) not in index:
                raise GraphError(f"channel {cid!r} references unknown pub_key {edge.get(key)!r}")
        a = index[edge["node1_pub"]]
        b = index[edge["node2_pub"]]
        if a == b:
            raise GraphError(f"self-loop channel {cid!r}")
        capacity = _parse_capacity(edge.get("capacity"), cid)
        channels.append(Channel(cid, a, b, capacity))
    return LnGraph(labels, channels)


def _parse_capacity(raw, channel_id: str) -> int:
    if isinstance(raw, bool) or raw is None:
        raise GraphError(f"non-numeric capacity on channel {channel_id!r}")
    try:
        capacity = int(raw)
    except (TypeError, ValueError):
        raise GraphError(f"non-numeric capacity {raw!r} on channel {channel_id!r}") from None
    if capacity < 0:
        raise GraphError(f"negative capacity on channel {channel_id!r}")
    return capacity


def parse_edge_list(document: str) -> LnGraph:
    """Parse edge-list CSV rows ``node_a,node_b,capacity_sat``.

    The header row is optional. Duplicate rows produce parallel channels
    with generated ids; an empty document yields an empty graph.
    """
    labels: list[str] = []
    index: dict[str, int] = {}
    channels: list[Channel] = []

    def canonical(label: str) -> int:
        if label not in index:
            index[label] = len(labels)
            labels.append(label)
        return index[label]

    reader = csv.reader(io.StringIO(document))
    for lineno, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        cells = [cell.strip() for cell in row]
        if lineno == 1 and tuple(cells) == EDGE_LIST_HEADER:
            continue
        if len(cells) != 3:
            raise GraphError(f"line {lineno}: expected 3 fields, got {len(cells)}")
        a_label, b_label, cap_text = cells
        if not a_label or not b_label:
            raise GraphError(f"line {lineno}: empty node label")
        cid = f"e{len(channels)}"
        try:
            capacity = int(cap_text)
        except ValueError:
            raise GraphError(f"line {lineno}: non-integer capacity {cap_text!r}") from None
        if capacity < 0:
            raise GraphError(f"line {lineno}: negative capacity")
        if a_label == b_label:
            raise GraphError(f"line {lineno}: self-loop on node {a_label!r}")
        channels.append(Channel(cid, canonical(a_label), canonical(b_label), capacity))
    return LnGraph(labels, channels)


def to_edge_list(graph: LnGraph) -> str:
    """Serialize to edge-list CSV (LF endings, header included).

    Isolated nodes are not representable in this format.
    """
    lines = [",".join(EDGE_LIST_HEADER)]
    for ch in graph.channels:
        lines.append(f"{graph.labels[ch.node1]},{graph.labels[ch.node2]},{ch.capacity}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ConstantCapacity:
    """Every synthetic channel gets the same capacity."""

    sat: int = DEFAULT_SYNTHETIC_CAPACITY_SAT

    def sample(self, rng: random.Random) -> int:
        return self.sat


@dataclass(frozen=True)
class UniformCapacity:
    """Synthetic capacities drawn uniformly from [lo, hi] satoshis."""

    lo: int
    hi: int

    def sample(self, rng: random.Random) -> int:
        return rng.randint(self.lo, self.hi)


def generate_scale_free(n: int, m: int, seed: int, capacity_dist=None) -> LnGraph:
    """Seeded preferential-attachment graph with a heavy-tailed degree
    distribution.

    Starts from a hub-and-spokes seed on m+1 nodes; each of the remaining
    n-m-1 nodes attaches m edges to distinct existing nodes chosen with
    probability proportional to current degree. Total channels:
    m + m*(n-m-1). Deterministic for a fixed (n, m, seed).
    """
    if m < 1:
        raise GraphError(f"m must be >= 1, got {m}")
    if n <= m:
        raise GraphError(f"need n > m, got n={n}, m={m}")
    rng = random.Random(seed)
    sampler = capacity_dist if capacity_dist is not None else ConstantCapacity()
    labels = [str(i) for i in range(n)]
    channels: list[Channel] = []

    def add_channel(a: int, b: int) -> None:
        channels.append(Channel(f"s{len(channels)}", a, b, sampler.sample(rng)))

    # hub-and-spokes seed: node 0 connected to 1..m
    repeated: list[int] = []
    for leaf in range(1, m + 1):
        add_channel(0, leaf)
        repeated.extend((0, leaf))
    for source in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            targets.add(rng.choice(repeated))
        for target in sorted(targets):
            add_channel(source, target)
            repeated.append(target)
        repeated.extend([source] * m)
    return LnGraph(labels, channels)


def degree_histogram(graph: LnGraph) -> dict[int, int]:
    """Map degree -> node count. Parallel channels each count once."""
    return dict(Counter(len(adj) for adj in graph.adjacency))
