import random
from fractions import Fraction

import pytest

from conftest import constant_scenario, fee, make_blocks
from lnme.doublespend import (
    AttackerStrategy,
    AverageCapacity,
    CapacityScaled,
    ChannelAttack,
    DoubleSpendReport,
    Fixed,
    Outcome,
    PenaltyPolicy,
    PerChannel,
    expected_profit,
    profit_vs_k,
    realized_profit,
    simulate_double_spend,
    to_self_delay,
)
from lnme.cut import Objective, build_cut
from lnme.graph import Channel, generate_scale_free
from lnme.scenario import Scenario
from lnme.strategies import Dynamic, Static

BANDS = [0, 10, 50]
SAT_PER_BTC = 100_000_000


def channels(count, capacity=4_500_000):
    return [Channel(f"c{i}", 0, i + 1, capacity) for i in range(count)]


def empty_scenario(blocks=60, txs=10**6):
    return constant_scenario(BANDS, [0, 0, 0], blocks, txs)


def congested_scenario(blocks=80, txs=2500, backlog=10**5):
    # the middle band is jammed; penalties at the average fee land in it
    return constant_scenario(BANDS, [0, backlog, 0], blocks, txs)


class TestToSelfDelay:
    def test_fixed(self):
        assert to_self_delay(123, Fixed(500)) == 500

    def test_scaled_average_channel(self):
        # arithmetic oracle: round(4.5e6 / 16777215 * 2016) = 541
        exact = Fraction(4_500_000 * 2016, 16_777_215)
        oracle = int(exact) + (1 if exact - int(exact) >= Fraction(1, 2) else 0)
        assert oracle == 541
        assert to_self_delay(4_500_000, CapacityScaled()) == oracle

    def test_scaled_clamps_low(self):
        # 100000 / 16777215 * 2016 is about 12, below the floor
        assert to_self_delay(100_000, CapacityScaled()) == 144

    def test_scaled_clamps_high(self):
        assert to_self_delay(10**9, CapacityScaled()) == 2016

    def test_negative_capacity_rejected(self):
        with pytest.raises(ValueError):
            to_self_delay(-1, Fixed(10))


class TestSimulate:
    def test_empty_timeline_all_defended(self):
        report = simulate_double_spend(
            channels(1000),
            PenaltyPolicy(),
            AttackerStrategy(fee(50)),
            Fixed(5),
            empty_scenario(),
        )
        assert report.attacked == 1000
        assert report.compromised == 0
        assert report.defended == 1000
        # commitments in block 1, penalties in block 2
        assert {a.commitment_height for a in report.attacks} == {1}
        assert {a.decided_height for a in report.attacks} == {2}

    def test_delay_beyond_horizon_compromises_nothing(self):
        report = simulate_double_spend(
            channels(50),
            PenaltyPolicy(),
            AttackerStrategy(fee(70)),
            Fixed(10_000),
            congested_scenario(),
        )
        assert report.compromised == 0
        assert all(a.sweep_submit_height is None for a in report.attacks)

    def test_congestion_compromises_static_victims(self):
        report = simulate_double_spend(
            channels(100),
            PenaltyPolicy(),
            AttackerStrategy(fee(70)),
            Fixed(5),
            congested_scenario(),
        )
        assert report.compromised == 100
        for atk in report.attacks:
            assert atk.sweep_submit_height == atk.commitment_height + atk.delay
            assert atk.decided_height > atk.sweep_submit_height

    def test_dynamic_victims_defend(self):
        report = simulate_double_spend(
            channels(100),
            PenaltyPolicy(dynamic=True, step=1, beta=2.0),
            AttackerStrategy(fee(70)),
            Fixed(5),
            congested_scenario(),
        )
        assert report.compromised == 0
        assert report.defended == 100

    def test_outcome_exclusive_and_conserved(self):
        report = simulate_double_spend(
            channels(60),
            PenaltyPolicy(),
            AttackerStrategy(fee(70)),
            Fixed(30),
            congested_scenario(blocks=40),
        )
        assert report.compromised + report.defended + report.undecided == 60

    def test_penalty_causality(self):
        report = simulate_double_spend(
            channels(30),
            PenaltyPolicy(),
            AttackerStrategy(fee(70)),
            Fixed(3),
            congested_scenario(),
        )
        for atk in report.attacks:
            assert atk.penalty_submit_height == atk.commitment_height

    def test_unconfirmed_commitments_stay_undecided(self):
        # commitment fee sits inside the jammed band and never confirms
        report = simulate_double_spend(
            channels(10),
            PenaltyPolicy(),
            AttackerStrategy(fee(20)),
            Fixed(5),
            congested_scenario(blocks=30),
        )
        assert report.undecided == 10
        assert report.horizon_exhausted

    def test_series_is_cumulative_compromised(self):
        report = simulate_double_spend(
            channels(40),
            PenaltyPolicy(),
            AttackerStrategy(fee(70)),
            Fixed(4),
            congested_scenario(),
        )
        values = [c for _, c in report.series]
        assert all(a <= b for a, b in zip(values, values[1:]))
        assert values[-1] == report.compromised

    def test_strict_expiry_withdraws_penalty(self):
        # penalties and sweeps share a jammed band that drains right after
        # the delay expires; the earlier-queued penalty wins the race unless
        # expiry invalidates it
        from conftest import make_timeline

        rows = [[0, 4000, 0]] * 8 + [[0, 0, 0]] * 40
        timeline = make_timeline(BANDS, rows, interval=600)
        trace = make_blocks(40, 2500)
        scn = Scenario(timeline, trace)
        args = (
            channels(5),
            PenaltyPolicy(),
            AttackerStrategy(fee(70), sweep=Static(fee(15))),
        )
        relaxed = simulate_double_spend(*args, Fixed(5), scn, strict_expiry=False)
        strict = simulate_double_spend(*args, Fixed(5), scn, strict_expiry=True)
        assert relaxed.defended == 5
        assert strict.compromised == 5

    def test_determinism(self):
        def run():
            report = simulate_double_spend(
                channels(80),
                PenaltyPolicy(dynamic=True, step=3, beta=1.2),
                AttackerStrategy(fee(70), sweep=Dynamic(fee(100), 4, 1.3)),
                CapacityScaled(max_delay=20, min_delay=5, max_funding=16_777_215),
                congested_scenario(blocks=70),
            )
            return report.to_json(profit_mode="per-channel", profit_sat=0)

        assert run() == run() == run()


class TestRealizedProfit:
    def outcomes(self, caps_compromised, caps_defended, caps_undecided=()):
        attacks = []
        for i, cap in enumerate(caps_compromised):
            attacks.append(
                ChannelAttack(Channel(f"w{i}", 0, 1, cap), 5, f"w{i}", outcome=Outcome.COMPROMISED)
            )
        for i, cap in enumerate(caps_defended):
            attacks.append(
                ChannelAttack(Channel(f"l{i}", 0, 1, cap), 5, f"l{i}", outcome=Outcome.DEFENDED)
            )
        for i, cap in enumerate(caps_undecided):
            attacks.append(ChannelAttack(Channel(f"u{i}", 0, 1, cap), 5, f"u{i}"))
        return DoubleSpendReport(attacks, [], bool(caps_undecided))

    def test_per_channel_hand_example(self):
        # capacities 2, 4, 6 BTC; stealing the 6 nets zero overall
        btc = SAT_PER_BTC
        report = self.outcomes([6 * btc], [2 * btc, 4 * btc])
        assert realized_profit(report, PerChannel()) == 0

    def test_average_all_compromised(self):
        report = self.outcomes([0] * 7, [])
        assert realized_profit(report, AverageCapacity(1000)) == 7 * 500

    def test_average_break_even_at_half(self):
        report = self.outcomes([0] * 5, [0] * 5)
        assert realized_profit(report, AverageCapacity(123_456)) == 0

    def test_average_formula_randomized(self):
        rng = random.Random(99)
        for _ in range(20):
            a = rng.randint(1, 500)
            n = rng.randint(0, a)
            c = rng.randint(1, 10**7)
            report = self.outcomes([0] * n, [0] * (a - n))
            exact = Fraction(c, 2) * n - Fraction(c, 2) * (a - n)
            got = realized_profit(report, AverageCapacity(c))
            assert abs(got - exact) <= Fraction(1, 2)
            if exact.denominator == 1:
                assert got == exact

    def test_per_channel_bounds(self):
        rng = random.Random(7)
        for _ in range(50):
            caps = [rng.randint(1, 10**7) for _ in range(rng.randint(1, 40))]
            split = rng.randint(0, len(caps))
            report = self.outcomes(caps[:split], caps[split:])
            half_total = Fraction(sum(caps), 2)
            assert -half_total <= realized_profit(report, PerChannel()) <= half_total

    def test_undecided_requires_exclusion(self):
        report = self.outcomes([100], [100], caps_undecided=[100])
        with pytest.raises(ValueError, match="undecided"):
            realized_profit(report, PerChannel())
        assert realized_profit(report, PerChannel(), exclude_undecided=True) == 0

    def test_excluded_undecided_shrinks_attacked_count(self):
        report = self.outcomes([0] * 3, [0], caps_undecided=[0] * 6)
        # a=4 decided, n=3: c/2 * (2n - a) = c/2 * 2
        assert realized_profit(report, AverageCapacity(100), exclude_undecided=True) == 100


class TestExpectedProfit:
    def cut_with_capacity(self, cap):
        g = generate_scale_free(10, 2, seed=1)
        cut = build_cut(g, [0], Objective.CAPACITY)
        object.__setattr__(cut, "cut_capacity", cap)
        return cut

    def test_half_probability_is_zero(self):
        assert expected_profit(self.cut_with_capacity(10**9), 0.5) == 0

    def test_certain_success(self):
        cap = int(1685.13 * SAT_PER_BTC)
        assert expected_profit(self.cut_with_capacity(cap), 1.0) == cap / 2

    def test_certain_failure(self):
        cap = 10**8
        assert expected_profit(self.cut_with_capacity(cap), 0.0) == -cap / 2

    def test_p_validated(self):
        with pytest.raises(ValueError):
            expected_profit(self.cut_with_capacity(1), 1.5)


class TestProfitVsK:
    def test_k_zero_row(self):
        g = generate_scale_free(30, 2, seed=4)
        rows = profit_vs_k(
            g,
            [0],
            PenaltyPolicy(),
            AttackerStrategy(fee(70)),
            Fixed(5),
            empty_scenario(),
        )
        assert rows == [
            {"k": 0, "attacked": 0, "compromised": 0, "defended": 0, "undecided": 0, "profit_sat": 0}
        ]

    def test_modes_agree_on_equal_capacities(self):
        report_channels = channels(20, capacity=1_000_000)
        scn = congested_scenario()
        report = simulate_double_spend(
            report_channels, PenaltyPolicy(), AttackerStrategy(fee(70)), Fixed(5), scn
        )
        per = realized_profit(report, PerChannel())
        avg = realized_profit(report, AverageCapacity(1_000_000))
        assert per == avg

    def test_table_over_ks(self):
        g = generate_scale_free(40, 2, seed=8)
        rows = profit_vs_k(
            g,
            [0, 1, 3],
            PenaltyPolicy(),
            AttackerStrategy(fee(70)),
            Fixed(5),
            congested_scenario(),
        )
        assert [r["k"] for r in rows] == [0, 1, 3]
        assert rows[1]["attacked"] > 0
        assert rows[1]["profit_sat"] > 0  # everything compromised under congestion
