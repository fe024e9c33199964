import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steersim.flows import DATA, PROTO_TCP, FlowKey
from steersim.host import CTX_INTERRUPT, DeliveryRecord
from steersim.metrics import (
    RunReport,
    affinity_scores,
    aggregate_rows,
    format_value,
    held_delay_histogram,
    occupancy_oracle,
    reordering_ratio,
    rows_to_csv,
)


def key(sport=1):
    return FlowKey("10.0.0.1", "10.0.0.2", PROTO_TCP, sport, 5001)


def rec(seq, t=0, core=0, app_core=0, kind=DATA):
    return DeliveryRecord(seq, t, core, CTX_INTERRUPT, app_core, kind)


class TestReorderingRatio:
    def test_in_order_log_is_zero(self):
        log = {key(): [rec(s) for s in range(10)]}
        assert reordering_ratio(log) == 0.0

    def test_one_inversion_in_ten(self):
        seqs = [0, 1, 2, 3, 5, 4, 6, 7, 8, 9]
        log = {key(): [rec(s) for s in seqs]}
        assert reordering_ratio(log) == 0.1

    def test_per_flow_not_cross_flow(self):
        log = {
            key(1): [rec(5), rec(6)],
            key(2): [rec(0), rec(1)],  # lower seqs on another flow: fine
        }
        assert reordering_ratio(log) == 0.0

    def test_empty_log(self):
        assert reordering_ratio({}) == 0.0


class TestOccupancyOracle:
    def test_max_list_one_matches_closed_form(self):
        # With a one-deep chain the oracle reduces to occupied buckets:
        # B*(1-(1-1/B)^N)/N.
        for n in (40, 200, 1000, 2000):
            closed = 256 * (1 - (1 - 1 / 256) ** n) / n
            assert math.isclose(occupancy_oracle(256, n, 1), closed, rel_tol=1e-9)

    def test_monte_carlo_agreement(self):
        # Independent check: throw flows into buckets at random and cap each
        # chain, comparing the admitted fraction with the analytic value.
        rng = random.Random(5)
        for n, m in ((2000, 6), (1000, 6), (2000, 1)):
            total = 0
            trials = 60
            for _ in range(trials):
                counts = [0] * 256
                for _ in range(n):
                    counts[rng.randrange(256)] += 1
                total += sum(min(c, m) for c in counts) / n
            assert abs(total / trials - occupancy_oracle(256, n, m)) < 0.01

    def test_monotone_in_flows_and_list_size(self):
        # More flows cannot raise the admitted fraction; a longer chain
        # cannot lower it.
        fractions = [occupancy_oracle(256, n, 6) for n in (40, 200, 1000, 2000)]
        assert fractions == sorted(fractions, reverse=True)
        by_m = [occupancy_oracle(256, 2000, m) for m in (1, 2, 4, 6, 8)]
        assert by_m == sorted(by_m)

    @given(st.integers(1, 512), st.integers(1, 3000), st.integers(1, 8))
    @settings(max_examples=60, deadline=None)
    def test_stays_in_unit_interval(self, buckets, flows, m):
        assert 0.0 <= occupancy_oracle(buckets, flows, m) <= 1.0


class TestAffinityScores:
    def test_every_flow_on_one_core(self):
        log = {key(i): [rec(s, t=s + 1, core=2, app_core=2) for s in range(4)]
               for i in range(3)}
        flow_aff, data_aff = affinity_scores(log, {k: 0 for k in log})
        assert flow_aff == 1.0 and data_aff == 1.0

    def test_alternating_cores_gives_half(self):
        recs = [rec(s, t=s + 1, core=s % 2, app_core=0) for s in range(10)]
        flow_aff, data_aff = affinity_scores({key(): recs}, {key(): 0})
        assert flow_aff == 0.5
        assert data_aff == 0.5

    def test_warm_up_cutoff_excludes_early_records(self):
        recs = [rec(0, t=5, core=1, app_core=0), rec(1, t=50, core=0, app_core=0)]
        flow_aff, data_aff = affinity_scores({key(): recs}, {key(): 10})
        assert flow_aff == 1.0 and data_aff == 1.0


class TestHeldDelayHistogram:
    def test_no_holds_empty(self):
        h = held_delay_histogram([], 100_000)
        assert h.total == 0 and h.max_delay == 0

    def test_mass_equals_count_and_bound(self):
        delays = [100, 5_000, 99_999, 50_000]
        h = held_delay_histogram(delays, 100_000)
        assert sum(h.counts) == len(delays)
        assert h.max_delay == 99_999 <= 100_000
        assert h.bin_edges[-1] == 100_000

    def test_zero_timer_degenerate(self):
        h = held_delay_histogram([0, 0], 0)
        assert h.total == 2 and h.max_delay == 0


class TestReportAndCsv:
    def test_ratios_validated(self):
        with pytest.raises(ValueError):
            RunReport(reordering_ratio=1.5)

    def test_csv_deterministic(self):
        rows = [
            RunReport(scenario="a", seed=1, reordering_ratio=0.25).to_row(),
            RunReport(scenario="a", seed=2, reordering_ratio=0.75).to_row(),
        ]
        assert rows_to_csv(rows) == rows_to_csv(rows)
        header = rows_to_csv(rows).splitlines()[0]
        assert header.startswith("schema,scenario,seed,mode")

    def test_aggregate_mean_and_stddev(self):
        rows = [
            RunReport(scenario="a", seed=1, reordering_ratio=0.2).to_row(),
            RunReport(scenario="a", seed=2, reordering_ratio=0.4).to_row(),
        ]
        agg = {a["metric"]: a for a in aggregate_rows(rows)}
        assert math.isclose(agg["reordering_ratio"]["mean"], 0.3)
        assert math.isclose(
            agg["reordering_ratio"]["stddev"], 0.14142135, rel_tol=1e-6
        )
        assert agg["reordering_ratio"]["n"] == 2

    def test_format_value_stable(self):
        assert format_value(0.1) == "0.1"
        assert format_value(1 / 3) == "0.333333333"
        assert format_value(7) == "7"
