"""Scenario definition and traffic generation.

A scenario file is versioned JSON describing topology, NIC mode, steering
table parameters, scheduler behaviour and the stream population. Streams
are one-directional: data flows sender -> receiver, acknowledgements flow
back. Stream generation is pure given a seeded rng, so runs replay exactly.
"""

import json
from dataclasses import asdict, dataclass, field

from .flows import ACK, DATA, SYN, SYNACK, PROTO_TCP, FlowKey, Packet, RX, TX
from .simkernel import US

SCENARIO_VERSION = 1

EPHEMERAL_START = 32768
EPHEMERAL_END = 65536


class ScenarioError(ValueError):
    pass


@dataclass
class TrafficSpec:
    streams: int = 40  # total parallel TCP streams, split across the ports
    ports: tuple = (5001, 6001)
    src_addr: str = "10.0.0.1"
    dst_addr: str = "10.0.0.2"
    packet_bytes: int = 1500
    data_packets_per_stream: int = 30
    per_stream_pps: float | None = None  # None: split 10 Gbps evenly
    burst: int = 3  # packets sent back to back
    burst_spacing_ns: int = 250
    jitter_ns: int = 0  # uniform jitter applied per burst
    ephemeral_ports: str = "sequential"  # or "random"
    ephemeral_start: int = EPHEMERAL_START
    handshake_gap_us: float = 10.0
    start_spread_us: float = 1000.0  # stream starts staggered over this window
    link_gbps: float = 10.0


@dataclass
class AppRule:
    """Placement for the app threads serving the given destination ports.
    One core pins the thread; several allow scheduler migration among them."""

    ports: tuple
    cores: tuple


@dataclass
class HostSpec:
    processors: tuple = ((0, 1), (2, 3))  # cores grouped by physical processor
    service_rate_pps: float = 3_000_000.0
    ack_every: int = 2
    syscall_cadence_us: float | None = 50.0


@dataclass
class SchedulerSpec:
    mode: str = "pinned"
    tick_us: float = 500.0
    forced_migration_period_us: float | None = None


@dataclass
class NicSpec:
    mode: str = "flowsteer"
    ring_capacity: int = 256
    latency_accounting: bool = False
    link_latency_us: float = 10.0


@dataclass
class RssSpec:
    key_hex: str | None = None  # default verification key when None
    style: str = "direct"  # or "indirection"
    table: tuple | None = None  # queue ids, power-of-two length
    fields: tuple = ("src_addr", "dst_addr", "src_port", "dst_port")


@dataclass
class TableSpec:
    num_buckets: int = 256
    max_list_size: int = 6
    max_entries: int = 10_000
    t_timer_us: float = 100.0
    t_delete_ms: float = 1000.0
    t_delete_pressure_ms: float = 100.0
    pressure_threshold: float = 0.9


@dataclass
class Scenario:
    name: str = "scenario"
    kind: str = "streams"  # or "worst_case"
    seed: int = 1
    duration_us: float = 30_000.0
    traffic: TrafficSpec = field(default_factory=TrafficSpec)
    nic: NicSpec = field(default_factory=NicSpec)
    rss: RssSpec = field(default_factory=RssSpec)
    flow_table: TableSpec = field(default_factory=TableSpec)
    host: HostSpec = field(default_factory=HostSpec)
    scheduler: SchedulerSpec = field(default_factory=SchedulerSpec)
    apps: tuple = (AppRule((5001,), (0,)), AppRule((6001,), (1,)))

    # ---- validation ----------------------------------------------------------

    def validate(self) -> "Scenario":
        if self.traffic.streams <= 0:
            raise ScenarioError("stream count must be positive")
        if self.duration_us < 0:
            raise ScenarioError("duration must not be negative")
        if self.flow_table.t_timer_us < 0:
            raise ScenarioError("t_timer must be non-negative")
        if self.flow_table.max_list_size <= 0:
            raise ScenarioError("max_list_size must be positive")
        if self.nic.mode not in ("rss", "flowsteer"):
            raise ScenarioError(f"unknown NIC mode {self.nic.mode!r}")
        if self.scheduler.mode not in (
            "pinned", "peak_performance", "power_saving", "cpuset"
        ):
            raise ScenarioError(f"unknown scheduler mode {self.scheduler.mode!r}")
        cores = [c for group in self.host.processors for c in group]
        if sorted(cores) != list(range(len(cores))):
            raise ScenarioError("processor groups must cover cores 0..n-1")
        for rule in self.apps:
            for core in rule.cores:
                if core not in cores:
                    raise ScenarioError(f"app rule names unknown core {core}")
        for port in (p for r in self.apps for p in r.ports):
            if port not in self.traffic.ports and self.kind == "streams":
                raise ScenarioError(f"app rule names unused port {port}")
        return self

    def num_cores(self) -> int:
        return sum(len(group) for group in self.host.processors)

    def app_rule_for_port(self, port: int) -> AppRule:
        for rule in self.apps:
            if port in rule.ports:
                return rule
        raise ScenarioError(f"no app placement rule for port {port}")

    # ---- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["version"] = SCENARIO_VERSION
        d["duration_us"] = float(self.duration_us)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        d = dict(d)
        version = d.pop("version", SCENARIO_VERSION)
        if version != SCENARIO_VERSION:
            raise ScenarioError(f"unsupported scenario version {version}")
        if "apps" in d:
            apps = tuple(
                AppRule(tuple(r["ports"]), tuple(r["cores"])) for r in d["apps"]
            )
        else:
            apps = (AppRule((5001,), (0,)), AppRule((6001,), (1,)))
        built = cls(
            name=d.get("name", "scenario"),
            kind=d.get("kind", "streams"),
            seed=int(d.get("seed", 1)),
            duration_us=float(d.get("duration_us", 30_000.0)),
            traffic=_build(TrafficSpec, d.get("traffic")),
            nic=_build(NicSpec, d.get("nic")),
            rss=_build(RssSpec, d.get("rss")),
            flow_table=_build(TableSpec, d.get("flow_table")),
            host=_build(HostSpec, d.get("host")),
            scheduler=_build(SchedulerSpec, d.get("scheduler")),
            apps=apps,
        )
        return built.validate()

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _build(spec_cls, data):
    if data is None:
        return spec_cls()
    kwargs = {}
    for name, spec_field in spec_cls.__dataclass_fields__.items():
        if name in data:
            value = data[name]
            if isinstance(value, list):
                value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
            # Keep numeric types canonical so save/load is a byte fixpoint.
            if (
                isinstance(value, int)
                and not isinstance(value, bool)
                and "float" in str(spec_field.type)
            ):
                value = float(value)
            kwargs[name] = value
    return spec_cls(**kwargs)


# ---- stream generation ----------------------------------------------------------


@dataclass
class StreamPlan:
    """One flow's full arrival schedule at the receiver NIC."""

    index: int
    key: FlowKey  # receive direction
    port: int
    syn_at: int
    synack_at: int
    ack_at: int
    data_times: list


def assign_ports(traffic: TrafficSpec, rng) -> list:
    """Unique ephemeral source ports, sequential by default or drawn
    uniformly without replacement in random mode."""
    n = traffic.streams
    if traffic.ephemeral_ports == "random":
        ports = rng.sample(range(EPHEMERAL_START, EPHEMERAL_END), n)
    else:
        ports = [traffic.ephemeral_start + i for i in range(n)]
        if ports[-1] >= EPHEMERAL_END:
            raise ScenarioError("sequential ports exhausted the ephemeral range")
    if len(set(ports)) != n:
        raise ScenarioError("duplicate port assignment")
    return ports


def spawn_streams(scenario: Scenario, rng) -> list:
    """Build every stream's handshake and data arrival schedule.

    Streams split evenly across the destination ports; each gets a unique
    source port, a staggered start, a SYN / SYN-ACK / ACK exchange and then
    bursts of data packets with gapless per-flow sequence numbers.
    """
    traffic = scenario.traffic
    ports = assign_ports(traffic, rng)
    gap = int(traffic.handshake_gap_us * US)
    spread = int(traffic.start_spread_us * US)
    duration = int(scenario.duration_us * US)

    pps = traffic.per_stream_pps
    if pps is None:
        total_pps = traffic.link_gbps * 1e9 / 8 / traffic.packet_bytes
        pps = total_pps / traffic.streams
    burst = max(1, traffic.burst)
    inter_burst = max(1, int(round(burst * 1e9 / pps)))

    plans = []
    for i in range(traffic.streams):
        dst_port = traffic.ports[i % len(traffic.ports)]
        key = FlowKey(
            traffic.src_addr, traffic.dst_addr, PROTO_TCP, ports[i], dst_port
        )
        start = (i * spread) // max(1, traffic.streams)
        syn_at = start
        synack_at = start + gap
        ack_at = start + 2 * gap
        data_start = start + 3 * gap
        times = []
        t = data_start
        while len(times) < traffic.data_packets_per_stream and t < duration:
            jitter = rng.randrange(0, traffic.jitter_ns + 1) if traffic.jitter_ns else 0
            # Bursts never overlap: per-flow arrival times stay strictly
            # increasing so source order equals sequence order.
            burst_t = t + jitter
            if times:
                burst_t = max(burst_t, times[-1] + traffic.burst_spacing_ns)
            for b in range(burst):
                if len(times) >= traffic.data_packets_per_stream:
                    break
                at = burst_t + b * traffic.burst_spacing_ns
                if at < duration:
                    times.append(at)
            t += inter_burst
        plans.append(
            StreamPlan(i, key, dst_port, syn_at, synack_at, ack_at, times)
        )
    return plans


def make_data_packet(key: FlowKey, seq: int, size: int, at: int) -> Packet:
    return Packet(key, DATA, RX, seq, size, at)


def make_handshake_packets(plan: StreamPlan, size: int = 64):
    syn = Packet(plan.key, SYN, RX, -1, size, plan.syn_at)
    synack = Packet(plan.key.reversed(), SYNACK, TX, -1, size, plan.synack_at)
    ack = Packet(plan.key, ACK, RX, -1, size, plan.ack_at)
    return syn, synack, ack


# ---- adversarial schedule -------------------------------------------------------


@dataclass
class WorstCaseEvent:
    at: int
    role: str  # filler | victim_data | migrate
    seq: int = -1


def adversarial_migration_schedule(ring_capacity: int, service_ns: int,
                                   t_fire_us: float = 50.0,
                                   epsilon_ns: int = 1) -> list:
    """Worst-case migration schedule for in-order analysis.

    Pre-loads the victim's old queue with ring_capacity - 1 packets of other
    flows, lands victim packet S one tick before the migration descriptor
    arrives, and packet S+1 one tick after. With a zero hold timer the new
    queue services S+1 while S still waits behind the backlog; with a timer
    of at least (ring_capacity - 1) * service_ns the flush lands after S's
    service start and order is preserved.
    """
    if ring_capacity < 2:
        raise ScenarioError("need a ring of at least two slots")
    t = int(t_fire_us * US)
    eps = max(1, epsilon_ns)
    events = []
    for i in range(ring_capacity - 1):
        events.append(WorstCaseEvent(t - 2 * eps, "filler", i))
    events.append(WorstCaseEvent(t - eps, "victim_data", 0))
    events.append(WorstCaseEvent(t, "migrate"))
    events.append(WorstCaseEvent(t + eps, "victim_data", 1))
    return events
