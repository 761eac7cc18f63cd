"""Shared builders for synthetic graphs, timelines, and block traces."""

import random

import pytest

from lnme.graph import Channel, LnGraph
from lnme.mempool import BlockEntry, BlockTrace, FeeRate, MempoolTimeline
from lnme.scenario import Scenario

T0 = 1_600_000_000
BLOCK_INTERVAL = 600


def fee(sat) -> FeeRate:
    return FeeRate.from_sat(sat)


def make_timeline(band_edges_sat, rows, start=T0, interval=60) -> MempoolTimeline:
    """Timeline from band edges in sat/vByte and per-snapshot count rows."""
    edges = tuple(FeeRate.from_sat(e) for e in band_edges_sat)
    timestamps = [start + i * interval for i in range(len(rows))]
    return MempoolTimeline(edges, timestamps, rows)


def constant_timeline(band_edges_sat, counts, snapshots, start=T0, interval=BLOCK_INTERVAL):
    return make_timeline(band_edges_sat, [list(counts)] * snapshots, start, interval)


def make_blocks(count, txs, start_height=1, start=T0, interval=BLOCK_INTERVAL) -> BlockTrace:
    return BlockTrace(
        [BlockEntry(start_height + i, start + i * interval, txs) for i in range(count)]
    )


def constant_scenario(band_edges_sat, counts, blocks, txs, capacity_mode=None) -> Scenario:
    """Constant congestion with one snapshot per block interval."""
    timeline = constant_timeline(band_edges_sat, counts, blocks + 1)
    trace = make_blocks(blocks, txs)
    if capacity_mode is None:
        return Scenario(timeline, trace)
    return Scenario(timeline, trace, capacity_mode)


def random_graph(rng: random.Random, n: int, p: float, unit_capacity=False) -> LnGraph:
    """Erdos-Renyi style graph; capacities 1 or random sat amounts."""
    labels = [str(i) for i in range(n)]
    channels = []
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                cap = 1 if unit_capacity else rng.randint(1, 10_000_000)
                channels.append(Channel(f"e{len(channels)}", a, b, cap))
    return LnGraph(labels, channels)


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
