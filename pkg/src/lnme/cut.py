"""k-lopsided max-cut: pick a coalition of exactly k nodes maximizing the
channels (or total capacity) crossing to the rest of the network.

The greedy solver maintains per-node gains in a lazy max-heap so large
graphs (tens of thousands of channels) solve in O((n + m) log n)-style
time; the exhaustive solver is a validation oracle for small instances.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass
from enum import Enum

from .graph import Channel, LnGraph

DEFAULT_ENUMERATION_BUDGET = 10_000_000


class EnumerationBudgetExceeded(RuntimeError):
    """Exact enumeration would scan more subsets than the budget allows."""


class Objective(Enum):
    """What a cut maximizes: crossing channel count or crossing capacity."""

    EDGE_COUNT = "edges"
    CAPACITY = "capacity"

    def weight(self, channel: Channel) -> int:
        return 1 if self is Objective.EDGE_COUNT else channel.capacity


@dataclass(frozen=True)
class GreedyStep:
    step: int           # 1-based move index
    node: int
    gain: int           # objective gain of this move
    value: int          # cumulative objective value after the move
    edge_count: int     # crossing channels after the move
    cut_capacity: int   # crossing capacity (sat) after the move


@dataclass(frozen=True)
class GreedyTrace:
    objective: Objective
    steps: tuple[GreedyStep, ...]


@dataclass(frozen=True)
class Cut:
    """A coalition together with its crossing channels."""

    k: int
    objective: Objective
    coalition: tuple[int, ...]
    cut_channels: tuple[Channel, ...]
    edge_count: int
    cut_capacity: int

    def value(self) -> int:
        return self.edge_count if self.objective is Objective.EDGE_COUNT else self.cut_capacity


def cut_value(graph: LnGraph, coalition) -> tuple[int, int]:
    """(crossing channel count, crossing capacity) of a coalition.

    A channel crosses when exactly one endpoint is in the coalition; the
    value is therefore symmetric under complementing the coalition.
    """
    inside = bytearray(graph.node_count)
    for v in coalition:
        if not 0 <= v < graph.node_count:
            raise ValueError(f"unknown node index {v}")
        inside[v] = 1
    edges = 0
    capacity = 0
    for ch in graph.channels:
        if inside[ch.node1] != inside[ch.node2]:
            edges += 1
            capacity += ch.capacity
    return edges, capacity


def build_cut(graph: LnGraph, coalition, objective: Objective) -> Cut:
    """Assemble a Cut for a given coalition, recomputing crossing channels
    from scratch."""
    inside = bytearray(graph.node_count)
    for v in coalition:
        inside[v] = 1
    crossing = tuple(ch for ch in graph.channels if inside[ch.node1] != inside[ch.node2])
    return Cut(
        k=len(coalition),
        objective=objective,
        coalition=tuple(coalition),
        cut_channels=crossing,
        edge_count=len(crossing),
        cut_capacity=sum(ch.capacity for ch in crossing),
    )


def greedy_lopsided_cut(
    graph: LnGraph, k: int, objective: Objective = Objective.EDGE_COUNT
) -> tuple[Cut, GreedyTrace]:
    """Grow the coalition one vertex at a time, always moving the vertex
    with maximum gain; ties go to the smallest node index.

    gain(v) = weight of v's channels to the outside minus weight of v's
    channels into the coalition. Negative-gain moves are still performed so
    the coalition size is exactly k.
    """
    n = graph.node_count
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    weight = objective.weight
    gain = [0] * n
    for ch in graph.channels:
        w = weight(ch)
        gain[ch.node1] += w
        gain[ch.node2] += w
    heap = [(-g, v) for v, g in enumerate(gain)]
    heapq.heapify(heap)
    in_coalition = bytearray(n)
    coalition: list[int] = []
    steps: list[GreedyStep] = []
    value = edges = capacity = 0
    while len(coalition) < k:
        neg, v = heapq.heappop(heap)
        if in_coalition[v]:
            continue
        if -neg != gain[v]:
            heapq.heappush(heap, (-gain[v], v))  # stale entry: refresh and retry
            continue
        in_coalition[v] = 1
        coalition.append(v)
        value += gain[v]
        for ci in graph.adjacency[v]:
            ch = graph.channels[ci]
            u = ch.other(v)
            if in_coalition[u]:
                edges -= 1
                capacity -= ch.capacity
            else:
                edges += 1
                capacity += ch.capacity
                gain[u] -= 2 * weight(ch)
        steps.append(GreedyStep(len(coalition), v, gain[v], value, edges, capacity))
    cut = build_cut(graph, coalition, objective)
    return cut, GreedyTrace(objective, tuple(steps))


def exact_lopsided_cut(
    graph: LnGraph,
    k: int,
    objective: Objective = Objective.EDGE_COUNT,
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> Cut:
    """Exhaustive maximizer over all k-subsets; refuses jobs whose subset
    count exceeds the budget. Ties resolve to the lexicographically
    smallest coalition index set."""
    n = graph.node_count
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    total = math.comb(n, k)
    if total > budget:
        raise EnumerationBudgetExceeded(
            f"C({n},{k}) = {total} subsets exceeds enumeration budget {budget}"
        )
    weight = objective.weight
    channels = [(ch.node1, ch.node2, weight(ch)) for ch in graph.channels]
    inside = bytearray(n)
    best_value = -1
    best: tuple[int, ...] = ()
    for combo in itertools.combinations(range(n), k):
        for v in combo:
            inside[v] = 1
        value = 0
        for a, b, w in channels:
            if inside[a] != inside[b]:
                value += w
        if value > best_value:
            best_value = value
            best = combo
        for v in combo:
            inside[v] = 0
    return build_cut(graph, best, objective)


def value_vs_k_curve(
    graph: LnGraph, k_max: int, objective: Objective = Objective.EDGE_COUNT
) -> list[tuple[int, int, int]]:
    """Greedy solution value at every k <= k_max from a single run.

    The greedy coalition at k is a prefix of the coalition at k_max, so one
    run yields the whole curve. Rows are (k, edge_count, cut_capacity).
    """
    if k_max == 0:
        return []
    _, trace = greedy_lopsided_cut(graph, k_max, objective)
    return [(s.step, s.edge_count, s.cut_capacity) for s in trace.steps]


def cut_to_json(graph: LnGraph, cut: Cut, manifest: str | None = None) -> str:
    """Cut export consumed by the simulators and the CLI."""
    doc = {
        "k": cut.k,
        "objective": cut.objective.value,
        "coalition": [graph.labels[v] for v in cut.coalition],
        "cut_channels": [
            {
                "id": ch.id,
                "node1": graph.labels[ch.node1],
                "node2": graph.labels[ch.node2],
                "capacity_sat": ch.capacity,
            }
            for ch in cut.cut_channels
        ],
        "edge_count": cut.edge_count,
        "cut_capacity_sat": cut.cut_capacity,
    }
    if manifest:
        doc["manifest"] = manifest
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class CutFile:
    """A cut export re-read from JSON; node indices are local to the file."""

    k: int
    objective: str
    coalition: tuple[str, ...]
    labels: tuple[str, ...]
    channels: tuple[Channel, ...]
    edge_count: int
    cut_capacity: int


def read_cut_json(document: str) -> CutFile:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed cut JSON: {exc}") from None
    labels: list[str] = []
    index: dict[str, int] = {}

    def canonical(label: str) -> int:
        if label not in index:
            index[label] = len(labels)
            labels.append(label)
        return index[label]

    channels = []
    for entry in doc.get("cut_channels", []):
        channels.append(
            Channel(
                str(entry["id"]),
                canonical(str(entry["node1"])),
                canonical(str(entry["node2"])),
                int(entry["capacity_sat"]),
            )
        )
    return CutFile(
        k=int(doc["k"]),
        objective=str(doc.get("objective", "")),
        coalition=tuple(doc.get("coalition", [])),
        labels=tuple(labels),
        channels=tuple(channels),
        edge_count=int(doc["edge_count"]),
        cut_capacity=int(doc["cut_capacity_sat"]),
    )


def curve_to_csv(curve) -> str:
    lines = ["k,edge_count,cut_capacity_sat"]
    lines += [f"{k},{e},{c}" for k, e, c in curve]
    return "\n".join(lines) + "\n"
