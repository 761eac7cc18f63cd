"""Mass double-spend simulation: adversarial commitment transactions race
victim penalty transactions, and expired channels are swept.

All commitments enter the mempool at attack start. The moment a channel's
commitment confirms, its penalty transaction is submitted (watchtower
behavior) at the mempool-average fee of that moment. If the penalty is
still unconfirmed once the channel's dispute delay has elapsed, the sweep
transaction is submitted; whichever of penalty and sweep confirms first
decides the channel, and the loser is withdrawn from the mempool. A
channel is compromised only when its sweep actually confirms (funds
moved), defended when its penalty confirms first.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from enum import Enum

from .cut import Cut, Objective, greedy_lopsided_cut
from .graph import Channel, LnGraph
from .mempool import FeeRate, ReplayEngine, TxStatus, average_fee
from .scenario import Scenario
from .strategies import Dynamic, FeeStrategy, Static, initial_fee

MAX_FUNDING_SAT = 16_777_215  # pre-wumbo channel-size cap, the scaling anchor
DEFAULT_MAX_DELAY = 2016
DEFAULT_MIN_DELAY = 144

DEFAULT_SWEEP_FEE = FeeRate.from_sat(100)


@dataclass(frozen=True)
class Fixed:
    """Same dispute delay for every channel."""

    blocks: int


@dataclass(frozen=True)
class CapacityScaled:
    """Dispute delay grows linearly with channel capacity, clamped to
    [min_delay, max_delay] blocks."""

    max_funding: int = MAX_FUNDING_SAT
    max_delay: int = DEFAULT_MAX_DELAY
    min_delay: int = DEFAULT_MIN_DELAY


DelayPolicy = Fixed | CapacityScaled


def to_self_delay(capacity: int, policy: DelayPolicy) -> int:
    """Dispute delay in blocks for a channel of the given capacity."""
    if capacity < 0:
        raise ValueError("capacity must be non-negative")
    if isinstance(policy, Fixed):
        return policy.blocks
    scaled = _div_round_half_up(capacity * policy.max_delay, policy.max_funding)
    return min(policy.max_delay, max(policy.min_delay, scaled))


def _div_round_half_up(num: int, den: int) -> int:
    return (2 * num + den) // (2 * den)


@dataclass(frozen=True)
class AttackerStrategy:
    """Shared commitment fee plus the sweep-transaction fee policy."""

    commitment_fee: FeeRate
    sweep: FeeStrategy = Static(DEFAULT_SWEEP_FEE)


@dataclass(frozen=True)
class PenaltyPolicy:
    """Victim response. The initial penalty fee is always the mempool
    average at submission, so only the bumping behavior is configurable."""

    dynamic: bool = False
    step: int = 7
    beta: float = 1.1

    def __post_init__(self):
        if self.dynamic:
            if self.step < 1:
                raise ValueError("step must be >= 1")
            if self.beta <= 1:
                raise ValueError("beta must be > 1")


class Outcome(Enum):
    UNDECIDED = "undecided"
    COMPROMISED = "compromised"
    DEFENDED = "defended"


@dataclass
class ChannelAttack:
    """Per-channel race state between commitment, penalty, and sweep."""

    channel: Channel
    delay: int
    stem: str
    outcome: Outcome = Outcome.UNDECIDED
    commitment_height: int | None = None
    penalty_submit_height: int | None = None
    sweep_submit_height: int | None = None
    decided_height: int | None = None
    penalty_submitted: bool = False
    sweep_submitted: bool = False

    @property
    def commitment_id(self) -> str:
        return f"{self.stem}-commit"

    @property
    def penalty_id(self) -> str:
        return f"{self.stem}-penalty"

    @property
    def sweep_id(self) -> str:
        return f"{self.stem}-sweep"


@dataclass
class DoubleSpendReport:
    attacks: list[ChannelAttack]
    series: list[tuple[int, int]]  # (block height, cumulative compromised)
    horizon_exhausted: bool
    events: list[tuple[int, list[str]]] | None = None  # (height, confirmed ids)

    @property
    def attacked(self) -> int:
        return len(self.attacks)

    @property
    def compromised(self) -> int:
        return sum(1 for a in self.attacks if a.outcome is Outcome.COMPROMISED)

    @property
    def defended(self) -> int:
        return sum(1 for a in self.attacks if a.outcome is Outcome.DEFENDED)

    @property
    def undecided(self) -> int:
        return sum(1 for a in self.attacks if a.outcome is Outcome.UNDECIDED)

    def series_csv(self) -> str:
        lines = ["height,cumulative_compromised"]
        lines += [f"{h},{c}" for h, c in self.series]
        return "\n".join(lines) + "\n"

    def events_jsonl(self) -> str:
        lines = [
            json.dumps({"height": h, "confirmed": ids}, sort_keys=True)
            for h, ids in (self.events or [])
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def to_json(
        self,
        profit_mode: str | None = None,
        profit_sat: int | None = None,
        manifest: str | None = None,
    ) -> str:
        doc = {
            "attacked": self.attacked,
            "compromised": self.compromised,
            "defended": self.defended,
            "undecided": self.undecided,
            "horizon_exhausted": self.horizon_exhausted,
            "per_channel": [
                {
                    "channel_id": a.channel.id,
                    "capacity_sat": a.channel.capacity,
                    "delay": a.delay,
                    "outcome": a.outcome.value,
                    "commitment_height": a.commitment_height,
                    "decided_height": a.decided_height,
                }
                for a in self.attacks
            ],
        }
        if profit_mode is not None:
            doc["profit_mode"] = profit_mode
            doc["realized_profit_sat"] = profit_sat
        if manifest:
            doc["manifest"] = manifest
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def simulate_double_spend(
    channels,
    honest: PenaltyPolicy,
    attacker: AttackerStrategy,
    delay_policy: DelayPolicy,
    scenario: Scenario,
    strict_expiry: bool = False,
    record_events: bool = False,
) -> DoubleSpendReport:
    """Race commitments, penalties, and sweeps over the scenario.

    Dynamic fee bumping (honest or sweep) runs on a per-transaction cadence
    counted from that transaction's own submission block. With
    ``strict_expiry`` the penalty is withdrawn the moment the sweep is
    submitted, so an expired channel can no longer be defended; the default
    lets a late penalty still win the race until the sweep confirms.
    """
    scenario_start = scenario.start()
    if scenario_start < scenario.timeline.start:
        raise ValueError("attack start precedes the timeline")
    engine = ReplayEngine(scenario.timeline, scenario.capacity_mode, record_events)
    attacks: list[ChannelAttack] = []
    by_commit: dict[str, ChannelAttack] = {}
    by_penalty: dict[str, ChannelAttack] = {}
    by_sweep: dict[str, ChannelAttack] = {}
    for i, ch in enumerate(channels):
        atk = ChannelAttack(
            channel=ch, delay=to_self_delay(ch.capacity, delay_policy), stem=f"{i:06d}"
        )
        engine.submit(atk.commitment_id, attacker.commitment_fee, scenario_start)
        by_commit[atk.commitment_id] = atk
        attacks.append(atk)

    sweep_step = attacker.sweep.step if isinstance(attacker.sweep, Dynamic) else 0
    # bump cadences bucketed by submission height mod step, so each block
    # only touches the transactions actually due
    penalty_buckets: list[list[ChannelAttack]] = [[] for _ in range(max(honest.step, 1))]
    sweep_buckets: list[list[ChannelAttack]] = [[] for _ in range(max(sweep_step, 1))]
    sweep_due: list[tuple[int, int, ChannelAttack]] = []  # (due height, index, channel)

    series: list[tuple[int, int]] = []
    compromised_total = 0
    undecided = len(attacks)
    for entry in scenario.trace:
        if entry.timestamp < scenario_start:
            continue
        if entry.timestamp > scenario.timeline.end:
            break
        height = entry.height
        for tx in engine.apply_block(entry):
            atk = by_commit.get(tx.id)
            if atk is not None:
                atk.commitment_height = height
                fee = average_fee(engine.histogram())
                engine.submit(atk.penalty_id, fee, entry.timestamp)
                atk.penalty_submitted = True
                atk.penalty_submit_height = height
                by_penalty[atk.penalty_id] = atk
                heapq.heappush(sweep_due, (height + atk.delay, len(by_penalty), atk))
                if honest.dynamic:
                    penalty_buckets[height % honest.step].append(atk)
                continue
            atk = by_penalty.get(tx.id)
            if atk is not None:
                if atk.outcome is Outcome.UNDECIDED:
                    atk.outcome = Outcome.DEFENDED
                    atk.decided_height = height
                    undecided -= 1
                    if atk.sweep_submitted and engine.transactions[atk.sweep_id].status is TxStatus.PENDING:
                        engine.withdraw(atk.sweep_id)
                continue
            atk = by_sweep.get(tx.id)
            if atk is not None and atk.outcome is Outcome.UNDECIDED:
                atk.outcome = Outcome.COMPROMISED
                atk.decided_height = height
                compromised_total += 1
                undecided -= 1
                if engine.transactions[atk.penalty_id].status is TxStatus.PENDING:
                    engine.withdraw(atk.penalty_id)
        # submit sweeps for channels whose dispute delay just elapsed
        while sweep_due and sweep_due[0][0] <= height:
            _, _, atk = heapq.heappop(sweep_due)
            if atk.outcome is not Outcome.UNDECIDED or atk.sweep_submitted:
                continue
            if engine.transactions[atk.penalty_id].status is not TxStatus.PENDING:
                continue
            engine.submit(atk.sweep_id, initial_fee(attacker.sweep), entry.timestamp)
            atk.sweep_submitted = True
            atk.sweep_submit_height = height
            by_sweep[atk.sweep_id] = atk
            if sweep_step:
                sweep_buckets[height % sweep_step].append(atk)
            if strict_expiry:
                engine.withdraw(atk.penalty_id)
        if honest.dynamic:
            _bump_due(
                engine,
                penalty_buckets[height % honest.step],
                lambda a: a.penalty_id,
                lambda a: a.penalty_submit_height,
                honest.beta,
                height,
                entry.timestamp,
            )
        if sweep_step:
            _bump_due(
                engine,
                sweep_buckets[height % sweep_step],
                lambda a: a.sweep_id,
                lambda a: a.sweep_submit_height,
                attacker.sweep.beta,
                height,
                entry.timestamp,
            )
        series.append((height, compromised_total))
        if undecided == 0:
            break
    return DoubleSpendReport(
        attacks, series, undecided > 0, events=engine.events if record_events else None
    )


def _bump_due(engine, bucket, tx_id_of, submit_height_of, beta, height, timestamp):
    """Bump every still-pending transaction in the cadence bucket, pruning
    entries that no longer need bumping."""
    live = []
    for atk in bucket:
        tx = engine.transactions.get(tx_id_of(atk))
        if tx is None or tx.status is not TxStatus.PENDING:
            continue
        live.append(atk)
        if height <= submit_height_of(atk):
            continue  # submitted this very block, first bump comes later
        new_fee = tx.fee.bumped(beta)
        if new_fee > tx.fee:
            engine.bump(tx.id, new_fee, timestamp)
    bucket[:] = live


@dataclass(frozen=True)
class AverageCapacity:
    """Profit from outcome counts and one average capacity per channel."""

    capacity_sat: int


@dataclass(frozen=True)
class PerChannel:
    """Profit from each attacked channel's actual capacity."""


ProfitMode = AverageCapacity | PerChannel


def realized_profit(report: DoubleSpendReport, mode: ProfitMode, exclude_undecided: bool = False) -> int:
    """Signed attacker profit in satoshis.

    A compromised channel wins half its capacity (the victim's expected
    balance); a defended channel forfeits the attacker's own half. Odd
    half-satoshi totals truncate toward zero, which keeps the result inside
    the [-sum(c)/2, +sum(c)/2] bounds. Undecided channels are an error
    unless explicitly excluded, in which case they drop out of the attacked
    count as well.
    """
    if report.undecided and not exclude_undecided:
        raise ValueError(
            f"{report.undecided} undecided channel(s); pass exclude_undecided=True to drop them"
        )
    if isinstance(mode, AverageCapacity):
        n = report.compromised
        a = report.compromised + report.defended if exclude_undecided else report.attacked
        twice = mode.capacity_sat * (2 * n - a)
    else:
        won = sum(a.channel.capacity for a in report.attacks if a.outcome is Outcome.COMPROMISED)
        lost = sum(a.channel.capacity for a in report.attacks if a.outcome is Outcome.DEFENDED)
        twice = won - lost
    return _halve_toward_zero(twice)


def _halve_toward_zero(twice: int) -> int:
    return twice // 2 if twice >= 0 else -((-twice) // 2)


def expected_profit(cut: Cut, p: float) -> float:
    """Expected satoshis gained when each attacked channel is stolen
    independently with probability p: (p - 1/2) times the cut capacity."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return (p - 0.5) * cut.cut_capacity


def profit_vs_k(
    graph: LnGraph,
    ks,
    honest: PenaltyPolicy,
    attacker: AttackerStrategy,
    delay_policy: DelayPolicy,
    scenario: Scenario,
    profit_mode: ProfitMode = PerChannel(),
) -> list[dict]:
    """Solve the capacity cut greedily at each k, attack its channels, and
    report realized profit (undecided channels excluded)."""
    rows = []
    for k in ks:
        if k == 0:
            rows.append(
                {"k": 0, "attacked": 0, "compromised": 0, "defended": 0, "undecided": 0, "profit_sat": 0}
            )
            continue
        cut, _ = greedy_lopsided_cut(graph, k, Objective.CAPACITY)
        report = simulate_double_spend(cut.cut_channels, honest, attacker, delay_policy, scenario)
        rows.append(
            {
                "k": k,
                "attacked": report.attacked,
                "compromised": report.compromised,
                "defended": report.defended,
                "undecided": report.undecided,
                "profit_sat": realized_profit(report, profit_mode, exclude_undecided=True),
            }
        )
    return rows


def profit_table_csv(rows) -> str:
    lines = ["k,attacked,compromised,defended,undecided,profit_sat"]
    for r in rows:
        lines.append(
            f"{r['k']},{r['attacked']},{r['compromised']},{r['defended']},{r['undecided']},{r['profit_sat']}"
        )
    return "\n".join(lines) + "\n"
