"""Mempool congestion replay: fee-band timelines, block traces, and the
deterministic engine deciding when monitored transactions confirm.

Historical congestion is overlay data. Each timeline snapshot gives the
number of pending transactions per fee band; snapshots are never mutated
by a simulation. A monitored (simulated) transaction holds a queue
position inside its band: the band's historical count at submission,
drained over time by the band's snapshot-to-snapshot outflow (count
decreases count as confirmations; increases queue behind). Draining a
position by per-step outflow with a floor at zero is equivalent to
flooring once against cumulative outflow, which is what the engine stores,
so position updates are O(1).

A block confirms pending monitored transactions in priority order (fee
band descending, queue position ascending, submission time, id) while the
number of strictly-higher-priority historical transactions is below the
block's remaining capacity. Displaced historical transactions are not
re-queued; congestion is simply re-read from the next snapshot.
"""

from __future__ import annotations

import csv
import io
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

SAT_CENTS = 100  # fee rates are fixed-point hundredths of sat/vByte

# Band lower edges (sat/vByte) of the public per-minute mempool dataset.
DEFAULT_BAND_EDGES_SAT = (
    0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 15, 20, 30, 40, 50, 60, 70, 80,
    100, 120, 150, 200, 250, 300, 350, 400, 500, 600, 700, 800,
    1000, 1200, 1400, 1700, 2000,
)


class TimelineError(ValueError):
    """A timeline or block-trace document violates its format."""


class ReplayError(RuntimeError):
    """An invalid replay-engine transition was requested."""


def _round_half_up(x: Fraction) -> int:
    return (2 * x.numerator + x.denominator) // (2 * x.denominator)


@dataclass(frozen=True, order=True)
class FeeRate:
    """Fee rate in hundredths of sat/vByte (fixed point, two decimals)."""

    centi: int

    def __post_init__(self):
        if self.centi < 0:
            raise ValueError("fee rate must be non-negative")

    @classmethod
    def from_sat(cls, value) -> "FeeRate":
        """Build from a sat/vByte number or numeric string, rounding half
        up to the 0.01 grid."""
        try:
            frac = Fraction(str(value)) * SAT_CENTS
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a fee rate: {value!r}") from None
        return cls(_round_half_up(frac))

    @property
    def sat(self) -> float:
        return self.centi / SAT_CENTS

    def bumped(self, beta) -> "FeeRate":
        """Multiply by beta, rounding half up to the fixed-point grid."""
        frac = Fraction(str(beta)) * self.centi
        return FeeRate(_round_half_up(frac))

    def __str__(self):
        return f"{self.centi // SAT_CENTS}.{self.centi % SAT_CENTS:02d}"


@dataclass(frozen=True)
class FeeHistogram:
    """Pending-transaction counts per fee band; the last band is open-ended
    above its lower edge."""

    band_edges: tuple[FeeRate, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if not self.band_edges:
            raise ValueError("at least one band required")
        if len(self.counts) != len(self.band_edges):
            raise ValueError("one count per band required")
        if any(lo >= hi for lo, hi in zip(self.band_edges, self.band_edges[1:])):
            raise ValueError("band edges must be strictly ascending")
        if any(c < 0 for c in self.counts):
            raise ValueError("negative band count")

    def band_index(self, fee: FeeRate) -> int:
        """Band containing fee, or -1 when fee is below the lowest edge."""
        return bisect_right(self.band_edges, fee) - 1

    def total(self) -> int:
        return sum(self.counts)


def average_fee(histogram: FeeHistogram) -> FeeRate:
    """Count-weighted mean of band representative rates.

    A band's representative is the midpoint of its edges; the open-ended
    top band is represented by its lower edge. An empty mempool falls back
    to the lowest edge.
    """
    edges = histogram.band_edges
    total = histogram.total()
    if total == 0:
        return edges[0]
    acc = Fraction(0)
    for i, count in enumerate(histogram.counts):
        if count == 0:
            continue
        if i + 1 < len(edges):
            rep = Fraction(edges[i].centi + edges[i + 1].centi, 2)
        else:
            rep = Fraction(edges[i].centi)
        acc += count * rep
    return FeeRate(_round_half_up(acc / total))


class MempoolTimeline:
    """Time-ordered fee-band histograms sharing one band grid.

    Nominal cadence is one snapshot per minute; gaps are allowed. Per-band
    cumulative outflow is precomputed at construction.
    """

    def __init__(self, band_edges, timestamps, counts):
        edges = tuple(band_edges)
        if not edges:
            raise TimelineError("at least one band required")
        if any(lo >= hi for lo, hi in zip(edges, edges[1:])):
            raise TimelineError("band edges must be strictly ascending")
        ts = [int(t) for t in timestamps]
        if not ts:
            raise TimelineError("timeline must be non-empty")
        for prev, cur in zip(ts, ts[1:]):
            if cur <= prev:
                raise TimelineError(f"timestamp {cur} does not increase past {prev}")
        arr = np.asarray(counts, dtype=np.int64)
        if arr.shape != (len(ts), len(edges)):
            raise TimelineError(
                f"counts shape {arr.shape} does not match {len(ts)} snapshots x {len(edges)} bands"
            )
        if (arr < 0).any():
            raise TimelineError("negative band count")
        self.band_edges = edges
        self.timestamps = ts
        self.counts = arr
        if len(ts) > 1:
            drops = np.maximum(arr[:-1] - arr[1:], 0)
            self.cum_outflow = np.vstack(
                [np.zeros((1, len(edges)), np.int64), np.cumsum(drops, axis=0)]
            )
        else:
            self.cum_outflow = np.zeros((1, len(edges)), np.int64)

    @property
    def start(self) -> int:
        return self.timestamps[0]

    @property
    def end(self) -> int:
        return self.timestamps[-1]

    def index_at(self, t: int) -> int:
        if t < self.timestamps[0] or t > self.timestamps[-1]:
            raise TimelineError(
                f"timestamp {t} outside timeline range [{self.timestamps[0]}, {self.timestamps[-1]}]"
            )
        return bisect_right(self.timestamps, t) - 1

    def snapshot_at(self, t: int) -> FeeHistogram:
        """Latest snapshot with timestamp <= t (step interpolation)."""
        i = self.index_at(t)
        return FeeHistogram(self.band_edges, tuple(int(c) for c in self.counts[i]))

    def __len__(self):
        return len(self.timestamps)


def load_timeline(document: str) -> MempoolTimeline:
    """Parse timeline CSV: header ``timestamp,<edge_0>,<edge_1>,...`` naming
    band lower edges, then one row of per-band counts per snapshot."""
    reader = csv.reader(io.StringIO(document))
    header = next(reader, None)
    if header is None:
        raise TimelineError("empty document")
    if len(header) < 2 or header[0].strip() != "timestamp":
        raise TimelineError("header must be 'timestamp,<edge_0>,<edge_1>,...'")
    try:
        edges = tuple(FeeRate.from_sat(cell.strip()) for cell in header[1:])
    except ValueError as exc:
        raise TimelineError(f"bad band edge in header: {exc}") from None
    timestamps: list[int] = []
    rows: list[list[int]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(edges) + 1:
            raise TimelineError(f"line {lineno}: expected {len(edges) + 1} fields, got {len(row)}")
        t = _parse_int(row[0], lineno, "timestamp")
        if timestamps and t <= timestamps[-1]:
            raise TimelineError(f"line {lineno}: timestamp {t} out of order (after {timestamps[-1]})")
        counts = [_parse_int(cell, lineno, "count") for cell in row[1:]]
        if any(c < 0 for c in counts):
            raise TimelineError(f"line {lineno}: negative count")
        timestamps.append(t)
        rows.append(counts)
    if not timestamps:
        raise TimelineError("timeline must be non-empty")
    return MempoolTimeline(edges, timestamps, rows)


def _parse_int(cell: str, lineno: int, what: str) -> int:
    text = cell.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise TimelineError(f"line {lineno}: bad {what} {cell!r}") from None
    if value != int(value):
        raise TimelineError(f"line {lineno}: bad {what} {cell!r}")
    return int(value)


@dataclass(frozen=True)
class BlockEntry:
    height: int
    timestamp: int
    tx_count: int


class BlockTrace:
    """Historical block schedule: consecutive heights, non-decreasing
    timestamps, non-negative transaction counts."""

    def __init__(self, entries):
        entries = list(entries)
        for prev, cur in zip(entries, entries[1:]):
            if cur.height != prev.height + 1:
                raise TimelineError(f"height gap {prev.height} -> {cur.height}")
            if cur.timestamp < prev.timestamp:
                raise TimelineError(f"timestamp decreases at height {cur.height}")
        for e in entries:
            if e.tx_count < 0:
                raise TimelineError(f"negative tx_count at height {e.height}")
        self.entries: list[BlockEntry] = entries

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


BLOCK_TRACE_HEADER = ("height", "timestamp", "tx_count")


def load_block_trace(document: str) -> BlockTrace:
    """Parse block-trace CSV rows ``height,timestamp,tx_count`` (header
    optional)."""
    reader = csv.reader(io.StringIO(document))
    entries: list[BlockEntry] = []
    for lineno, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        cells = [cell.strip() for cell in row]
        if lineno == 1 and tuple(cells) == BLOCK_TRACE_HEADER:
            continue
        if len(cells) != 3:
            raise TimelineError(f"line {lineno}: expected 3 fields, got {len(cells)}")
        entries.append(
            BlockEntry(
                _parse_int(cells[0], lineno, "height"),
                _parse_int(cells[1], lineno, "timestamp"),
                _parse_int(cells[2], lineno, "tx_count"),
            )
        )
    if not entries:
        raise TimelineError("block trace must be non-empty")
    return BlockTrace(entries)


@dataclass(frozen=True)
class Historical:
    """Block capacity = the block's historical transaction count."""


@dataclass(frozen=True)
class ConstantAverage:
    """Every block fits a constant average number of transactions.

    Fractional averages accumulate across blocks so the long-run rate is
    exact."""

    avg_tx_per_block: float

    def __post_init__(self):
        if self.avg_tx_per_block <= 0:
            raise ValueError("avg_tx_per_block must be positive")


CapacityMode = Historical | ConstantAverage


class TxStatus(Enum):
    PENDING = "pending"
    CONFIRMED = "confirmed"
    WITHDRAWN = "withdrawn"


@dataclass
class MonitoredTx:
    """A simulated transaction tracked against historical congestion.

    ``same_band_ahead`` is the number of historical transactions in this
    transaction's band that must confirm first: the band count observed at
    submission, drained by the band's outflow since then. ``queued_at``
    is the replace-by-fee re-submission time used for FIFO tie-breaking;
    ``submitted_at`` never changes.
    """

    id: str
    fee: FeeRate
    submitted_at: int
    band: int
    seq: int
    status: TxStatus = TxStatus.PENDING
    confirmed_height: int | None = None
    queued_at: int = 0
    _queue_pos: int = field(default=0, repr=False)
    _outflow_mark: int = field(default=0, repr=False)
    _outflows: list | None = field(default=None, repr=False)

    @property
    def same_band_ahead(self) -> int:
        if self.band < 0:
            return 0
        drained = 0 if self._outflows is None else self._outflows[self.band] - self._outflow_mark
        remaining = self._queue_pos - drained
        return remaining if remaining > 0 else 0

    def _rank(self) -> int:
        # absolute queue coordinate inside the band's cumulative outflow
        return self._queue_pos + self._outflow_mark


def higher_priority_count(histogram: FeeHistogram, tx: MonitoredTx) -> int:
    """Historical transactions that must confirm before tx: everything in
    strictly higher bands plus tx's remaining same-band queue."""
    above = sum(histogram.counts[tx.band + 1:]) if tx.band >= 0 else sum(histogram.counts)
    return above + tx.same_band_ahead


@dataclass
class _BandQueue:
    txs: deque = field(default_factory=deque)
    dirty: bool = True
    # smallest rank still above the band's outflow at the last sort;
    # None means every queued position has hit zero (order is settled)
    min_unfloored_rank: int | None = None


class ReplayEngine:
    """Deterministic single-owner replay of monitored transactions.

    Event timestamps (submissions, bumps, blocks) must be non-decreasing
    and inside the timeline range. Distinct engines sharing a timeline may
    run in parallel; one engine must not be mutated concurrently.
    """

    def __init__(
        self,
        timeline: MempoolTimeline,
        capacity_mode: CapacityMode = Historical(),
        record_events: bool = False,
    ):
        self.timeline = timeline
        self.capacity_mode = capacity_mode
        self.record_events = record_events
        self.events: list[tuple[int, list[str]]] = []
        self.transactions: dict[str, MonitoredTx] = {}
        self._bands: dict[int, _BandQueue] = {}
        self._snap = 0
        self._clock = timeline.timestamps[0]
        self._counts = [int(c) for c in timeline.counts[0]]
        self._outflow = [int(c) for c in timeline.cum_outflow[0]]
        self._seq = 0
        self._last_height: int | None = None
        self._carry = 0.0

    # -- snapshot cursor -------------------------------------------------

    @property
    def clock(self) -> int:
        return self._clock

    def _advance(self, t: int) -> None:
        if t < self._clock:
            raise ReplayError(f"event at {t} precedes engine clock {self._clock}")
        idx = self.timeline.index_at(t)
        if idx != self._snap:
            self._snap = idx
            self._counts = [int(c) for c in self.timeline.counts[idx]]
            # in-place so transactions holding this list see fresh totals
            self._outflow[:] = [int(c) for c in self.timeline.cum_outflow[idx]]
        self._clock = t

    def step_snapshot(self) -> None:
        """Advance one snapshot, draining queue positions by per-band
        outflow: each pending transaction in a band loses max(0, old count
        minus new count), floored at zero."""
        if self._snap + 1 >= len(self.timeline.timestamps):
            raise ReplayError("no snapshot after the current one")
        self._advance(self.timeline.timestamps[self._snap + 1])

    def histogram(self) -> FeeHistogram:
        """Congestion at the engine clock."""
        return FeeHistogram(self.timeline.band_edges, tuple(self._counts))

    def _band_index(self, fee: FeeRate) -> int:
        return bisect_right(self.timeline.band_edges, fee) - 1

    # -- operations --------------------------------------------------------

    def submit(self, tx_id: str, fee: FeeRate, at: int) -> MonitoredTx:
        """Register a pending transaction; its queue position is the
        historical count of its band at the submission-time snapshot."""
        if tx_id in self.transactions:
            raise ReplayError(f"duplicate transaction id {tx_id!r}")
        self._advance(at)
        band = self._band_index(fee)
        tx = MonitoredTx(
            id=tx_id,
            fee=fee,
            submitted_at=at,
            band=band,
            seq=self._seq,
            queued_at=at,
            _queue_pos=self._counts[band] if band >= 0 else 0,
            _outflow_mark=self._outflow[band] if band >= 0 else 0,
            _outflows=self._outflow,
        )
        self._seq += 1
        self.transactions[tx_id] = tx
        self._enqueue(tx)
        return tx

    def bump(self, tx_id: str, new_fee: FeeRate, at: int) -> MonitoredTx:
        """Replace-by-fee: re-submission semantics, so the queue position
        resets to the new band's current historical count."""
        tx = self.transactions.get(tx_id)
        if tx is None or tx.status is not TxStatus.PENDING:
            raise ReplayError(f"transaction {tx_id!r} is not pending")
        if new_fee <= tx.fee:
            raise ReplayError(f"bump must increase the fee ({new_fee} <= {tx.fee})")
        self._advance(at)
        band = self._band_index(new_fee)
        tx.fee = new_fee
        tx.queued_at = at
        tx._queue_pos = self._counts[band] if band >= 0 else 0
        tx._outflow_mark = self._outflow[band] if band >= 0 else 0
        if band != tx.band:
            # fee only rises, so the band only rises: the old queue entry
            # can never be revisited and is pruned lazily
            tx.band = band
            self._enqueue(tx)
        else:
            self._bands[band].dirty = True
        return tx

    def withdraw(self, tx_id: str) -> MonitoredTx:
        tx = self.transactions.get(tx_id)
        if tx is None or tx.status is not TxStatus.PENDING:
            raise ReplayError(f"transaction {tx_id!r} is not pending")
        tx.status = TxStatus.WITHDRAWN
        return tx

    def apply_block(self, entry: BlockEntry) -> list[MonitoredTx]:
        """Confirm monitored transactions that fit this block.

        A transaction confirms when the count of strictly-higher-priority
        historical transactions is below the block's remaining capacity;
        each confirmation consumes one capacity unit.
        """
        if self._last_height is not None and entry.height <= self._last_height:
            raise ReplayError(f"block {entry.height} out of order after {self._last_height}")
        self._advance(entry.timestamp)
        self._last_height = entry.height
        remaining = self._block_capacity(entry)
        confirmed: list[MonitoredTx] = []
        counts = self._counts
        suffix = [0] * (len(counts) + 1)
        for i in range(len(counts) - 1, -1, -1):
            suffix[i] = suffix[i + 1] + counts[i]
        for band in sorted(self._bands, reverse=True):
            if remaining <= 0:
                break
            queue = self._bands[band]
            txs = queue.txs
            if not txs:
                continue
            if self._needs_sort(band, queue):
                self._resort(band, queue)
                txs = queue.txs
            above = suffix[band + 1] if band >= 0 else suffix[0]
            while txs and remaining > 0:
                tx = txs[0]
                if tx.status is not TxStatus.PENDING or tx.band != band:
                    txs.popleft()  # stale: bumped away, confirmed, or withdrawn
                    continue
                if above + tx.same_band_ahead >= remaining:
                    break  # sorted by position: the rest of the band fails too
                txs.popleft()
                tx.status = TxStatus.CONFIRMED
                tx.confirmed_height = entry.height
                confirmed.append(tx)
                remaining -= 1
        if self.record_events and confirmed:
            self.events.append((entry.height, [tx.id for tx in confirmed]))
        return confirmed

    def pending(self) -> list[MonitoredTx]:
        """Pending transactions in submission order."""
        return [tx for tx in self.transactions.values() if tx.status is TxStatus.PENDING]

    # -- internals ---------------------------------------------------------

    def _enqueue(self, tx: MonitoredTx) -> None:
        queue = self._bands.get(tx.band)
        if queue is None:
            queue = self._bands[tx.band] = _BandQueue()
        queue.txs.append(tx)
        queue.dirty = True

    def _needs_sort(self, band: int, queue: _BandQueue) -> bool:
        if queue.dirty:
            return True
        if queue.min_unfloored_rank is None:
            return False  # order settled until the next arrival or bump
        o_now = self._outflow[band] if band >= 0 else 0
        return o_now >= queue.min_unfloored_rank

    def _resort(self, band: int, queue: _BandQueue) -> None:
        live = [tx for tx in queue.txs if tx.status is TxStatus.PENDING and tx.band == band]
        live.sort(key=lambda tx: (tx.same_band_ahead, tx.queued_at, tx.id))
        queue.txs = deque(live)
        queue.dirty = False
        o_now = self._outflow[band] if band >= 0 else 0
        unfloored = [tx._rank() for tx in live if tx._rank() > o_now]
        queue.min_unfloored_rank = min(unfloored) if unfloored else None

    def _block_capacity(self, entry: BlockEntry) -> int:
        mode = self.capacity_mode
        if isinstance(mode, Historical):
            return entry.tx_count
        want = mode.avg_tx_per_block + self._carry
        cap = int(want)
        self._carry = want - cap
        return cap
