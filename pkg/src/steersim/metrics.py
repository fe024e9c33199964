"""Post-run metric computation and CSV/report emission.

All functions are pure over immutable run logs. The CSV schema is versioned:
bump CSV_SCHEMA_VERSION when columns change meaning.
"""

import math
import statistics
from dataclasses import dataclass, field

from .flows import DATA

CSV_SCHEMA_VERSION = 1


def reordering_ratio(delivered: dict) -> float:
    """Fraction of delivered data packets whose sequence number is below the
    running maximum already delivered for that flow."""
    total = 0
    inversions = 0
    for records in delivered.values():
        high = -1
        for rec in records:
            if rec.kind != DATA:
                continue
            total += 1
            if rec.seq < high:
                inversions += 1
            else:
                high = rec.seq
    return inversions / total if total else 0.0


def admitted_fraction(admitted: int, total_handshaked: int) -> float:
    return admitted / total_handshaked if total_handshaked else 0.0


def occupancy_oracle(num_buckets: int, flows: int, max_list_size: int) -> float:
    """Analytic expected admitted fraction under uniform bucket hashing.

    Each bucket's occupancy is Binomial(flows, 1/num_buckets); a bucket
    admits at most max_list_size flows, so the expectation is
    B * E[min(X, m)] / N, computed exactly via log-space binomial terms.
    """
    if flows <= 0:
        return 1.0
    n, b, m = flows, num_buckets, max_list_size
    if m >= n:
        return 1.0
    if b == 1:
        return min(n, m) / n
    p = 1.0 / b
    log_p, log_q = math.log(p), math.log1p(-p)
    expected = float(m)
    for k in range(m):
        log_pmf = (
            math.lgamma(n + 1)
            - math.lgamma(k + 1)
            - math.lgamma(n - k + 1)
            + k * log_p
            + (n - k) * log_q
        )
        expected -= (m - k) * math.exp(log_pmf)
    return min(1.0, b * expected / n)


def affinity_scores(delivered: dict, warm_up_end: dict) -> tuple:
    """(flow_affinity, data_affinity) over post-warm-up data deliveries.

    flow_affinity: per flow, the fraction of packets processed on the flow's
    modal core, averaged over flows. data_affinity: fraction of packets
    processed on the core the application occupied at that moment.
    """
    per_flow_scores = []
    on_app_core = 0
    total = 0
    for key, records in delivered.items():
        cutoff = warm_up_end.get(key, -1)
        cores = []
        for rec in records:
            if rec.kind != DATA or rec.t <= cutoff:
                continue
            cores.append(rec.core)
            total += 1
            if rec.core == rec.app_core:
                on_app_core += 1
        if cores:
            counts = {}
            for c in cores:
                counts[c] = counts.get(c, 0) + 1
            per_flow_scores.append(max(counts.values()) / len(cores))
    flow_affinity = (
        sum(per_flow_scores) / len(per_flow_scores) if per_flow_scores else 1.0
    )
    data_affinity = on_app_core / total if total else 1.0
    return flow_affinity, data_affinity


@dataclass
class HeldDelayHistogram:
    bin_edges: list
    counts: list
    max_delay: int = 0
    mean_delay: float = 0.0
    total: int = 0


def held_delay_histogram(delays, t_timer_ns: int, bins: int = 20) -> HeldDelayHistogram:
    """Distribution of (flush time - arrival time) over held packets.

    Every delay is bounded by the hold timer, so the top edge is t_timer.
    """
    delays = list(delays)
    if t_timer_ns <= 0 or bins < 1:
        edges = [0, max(delays, default=0) + 1]
        counts = [len(delays)]
    else:
        width = t_timer_ns / bins
        edges = [int(i * width) for i in range(bins + 1)]
        counts = [0] * bins
        for d in delays:
            idx = min(int(d / width), bins - 1)
            counts[idx] += 1
    return HeldDelayHistogram(
        bin_edges=edges,
        counts=counts,
        max_delay=max(delays, default=0),
        mean_delay=sum(delays) / len(delays) if delays else 0.0,
        total=len(delays),
    )


# ---- run report -------------------------------------------------------------


@dataclass
class RunReport:
    """One row per run; every ratio lies in [0, 1]."""

    scenario: str = ""
    seed: int = 0
    mode: str = ""
    duration_us: float = 0.0
    generated_data: int = 0
    delivered_data: int = 0
    delivered_interrupt: int = 0
    delivered_process: int = 0
    process_context_fraction: float = 0.0
    reordering_ratio: float = 0.0
    handshakes: int = 0
    admitted: int = 0
    rejected_bucket_full: int = 0
    rejected_table_full: int = 0
    admitted_fraction: float = 0.0
    evictions: int = 0
    peak_entries: int = 0
    transitions: int = 0
    held_packets: int = 0
    peak_held_bytes: int = 0
    held_delay_max_ns: int = 0
    held_delay_mean_ns: float = 0.0
    table_memory_peak_bytes: int = 0
    drops: int = 0
    interrupts: int = 0
    migrations: int = 0
    acks_sent: int = 0
    flow_affinity: float = 0.0
    data_affinity: float = 0.0
    cross_core_packets: int = 0
    cross_processor_packets: int = 0
    alternations: int = 0
    lock_conflict_events: int = 0
    queue_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in (
            "process_context_fraction",
            "reordering_ratio",
            "admitted_fraction",
            "flow_affinity",
            "data_affinity",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")

    def to_row(self) -> dict:
        row = {
            "schema": CSV_SCHEMA_VERSION,
            "scenario": self.scenario,
            "seed": self.seed,
            "mode": self.mode,
            "duration_us": self.duration_us,
            "generated_data": self.generated_data,
            "delivered_data": self.delivered_data,
            "delivered_interrupt": self.delivered_interrupt,
            "delivered_process": self.delivered_process,
            "process_context_fraction": self.process_context_fraction,
            "reordering_ratio": self.reordering_ratio,
            "handshakes": self.handshakes,
            "admitted": self.admitted,
            "rejected_bucket_full": self.rejected_bucket_full,
            "rejected_table_full": self.rejected_table_full,
            "admitted_fraction": self.admitted_fraction,
            "evictions": self.evictions,
            "peak_entries": self.peak_entries,
            "transitions": self.transitions,
            "held_packets": self.held_packets,
            "peak_held_bytes": self.peak_held_bytes,
            "held_delay_max_ns": self.held_delay_max_ns,
            "held_delay_mean_ns": self.held_delay_mean_ns,
            "table_memory_peak_bytes": self.table_memory_peak_bytes,
            "drops": self.drops,
            "interrupts": self.interrupts,
            "migrations": self.migrations,
            "acks_sent": self.acks_sent,
            "flow_affinity": self.flow_affinity,
            "data_affinity": self.data_affinity,
            "cross_core_packets": self.cross_core_packets,
            "cross_processor_packets": self.cross_processor_packets,
            "alternations": self.alternations,
            "lock_conflict_events": self.lock_conflict_events,
        }
        for q in sorted(self.queue_stats):
            for stat, value in self.queue_stats[q].items():
                row[f"q{q}_{stat}"] = value
        return row


def format_value(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    header = list(rows[0])
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(row[col]) for col in header))
    return "\n".join(lines) + "\n"


def aggregate_rows(rows) -> list:
    """Mean and sample stddev per numeric column, in column order."""
    if not rows:
        return []
    out = []
    for col in rows[0]:
        values = [r[col] for r in rows]
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            continue
        mean = statistics.fmean(values)
        std = statistics.stdev(values) if len(values) > 1 else 0.0
        out.append(
            {
                "metric": col,
                "mean": mean,
                "stddev": std,
                "min": min(values),
                "max": max(values),
                "n": len(values),
            }
        )
    return out


def summary_text(scenario_name: str, mode: str, aggregates: list) -> str:
    lines = [f"scenario: {scenario_name}", f"mode: {mode}", ""]
    width = max((len(a["metric"]) for a in aggregates), default=10)
    for a in aggregates:
        lines.append(
            f"{a['metric']:<{width}}  mean={format_value(a['mean'])}"
            f"  stddev={format_value(a['stddev'])}"
            f"  min={format_value(a['min'])}  max={format_value(a['max'])}"
        )
    return "\n".join(lines) + "\n"
