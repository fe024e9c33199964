"""Wires one scenario into a simulation and executes it.

The receiver under test is a multi-queue NIC feeding per-core rings on a
multicore host. Incoming traffic is scripted by the workload; outgoing
SYN-ACKs and data ACKs are generated here and carry the processing core id
in their transmit descriptors.
"""

from dataclasses import dataclass, field

from .flowtable import FlowTable, FlowTableConfig, memory_estimate
from .flows import ACK, DATA, PROTO_TCP, RX, TX, FlowKey, Packet, reverse_key
from .host import AppProcess, Core, Host, contention_proxy
from .metrics import (
    RunReport,
    affinity_scores,
    admitted_fraction,
    held_delay_histogram,
    reordering_ratio,
)
from .nic import MODE_FLOWSTEER, Nic, NicConfig, TransmitDescriptor
from .rss import DEFAULT_RSS_KEY, HashFields, IndirectionTable, RssEngine
from .simkernel import MS, US, Simulator, make_rng
from .workload import (
    EPHEMERAL_END,
    EPHEMERAL_START,
    Scenario,
    StreamPlan,
    adversarial_migration_schedule,
    make_handshake_packets,
    spawn_streams,
)

AGE_SWEEP_INTERVAL_NS = 10 * MS


@dataclass
class RunResult:
    report: RunReport
    delivered: dict = field(default_factory=dict)  # key -> [DeliveryRecord]
    warm_up_end: dict = field(default_factory=dict)
    hold_delays: list = field(default_factory=list)
    table_stats: object = None
    queue_stats: dict = field(default_factory=dict)
    host_stats: object = None
    migrations: list = field(default_factory=list)


def build_rss_engine(scenario: Scenario) -> RssEngine:
    cfg = scenario.rss
    key = bytes.fromhex(cfg.key_hex) if cfg.key_hex else DEFAULT_RSS_KEY
    table = None
    if cfg.style == "indirection":
        entries = cfg.table or tuple(
            q % scenario.num_cores() for q in range(8 * scenario.num_cores())
        )
        table = IndirectionTable.from_list(list(entries))
    return RssEngine(
        key=key,
        hash_fields=HashFields.from_names(cfg.fields),
        num_queues=scenario.num_cores(),
        table=table,
    )


class Engine:
    """One simulation run: builds the models, schedules the workload, runs
    to the scenario horizon and assembles the report."""

    def __init__(self, scenario: Scenario, seed: int | None = None):
        scenario.validate()
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.rng = make_rng(self.seed)
        self.sim = Simulator()
        self.duration_ns = int(scenario.duration_us * US)

        num_cores = scenario.num_cores()
        service_ns = max(1, round(1e9 / scenario.host.service_rate_pps))
        processor_of = {}
        for proc_id, group in enumerate(scenario.host.processors):
            for core in group:
                processor_of[core] = proc_id
        self.cores = [Core(c, processor_of[c], service_ns) for c in range(num_cores)]
        self._processor_of = processor_of

        self.rss = build_rss_engine(scenario)
        self.table = None
        nic_config = NicConfig(
            num_queues=num_cores,
            ring_capacity=scenario.nic.ring_capacity,
            mode=scenario.nic.mode,
            latency_accounting=scenario.nic.latency_accounting,
            link_latency_ns=int(scenario.nic.link_latency_us * US),
        )
        if scenario.nic.mode == MODE_FLOWSTEER:
            ft = scenario.flow_table
            self.table = FlowTable(
                FlowTableConfig(
                    num_buckets=ft.num_buckets,
                    max_list_size=ft.max_list_size,
                    max_entries=ft.max_entries,
                    t_timer_ns=int(ft.t_timer_us * US),
                    t_delete_ns=int(ft.t_delete_ms * MS),
                    t_delete_pressure_ns=int(ft.t_delete_pressure_ms * MS),
                    pressure_threshold=ft.pressure_threshold,
                ),
                schedule_timer=self._schedule_hold_timer,
                fallback_core=lambda key: self.nic.fallback_core(key),
            )
        self.nic = Nic(
            nic_config, self.rss, self.table, self.sim,
            interrupt_cb=self._on_ring_edge,
        )
        self.host = Host(
            self.cores,
            self.sim,
            self.nic,
            scheduler_mode=scenario.scheduler.mode,
            ack_every=scenario.host.ack_every,
            emit_ack=self._emit_ack,
        )

        self.generated_data = 0
        self.flush_times: dict[FlowKey, int] = {}

    # -- wiring callbacks --------------------------------------------------------

    def _on_ring_edge(self, queue_id: int):
        self.sim.schedule(self.sim.now(), lambda: self.host.on_interrupt(queue_id))

    def _schedule_hold_timer(self, deadline: int, key: FlowKey):
        def fire():
            self.nic.on_hold_timer(key)
            self.flush_times[key] = self.sim.now()

        self.sim.schedule(deadline, fire)

    def _emit_ack(self, key: FlowKey, core_id: int, now: int):
        packet = Packet(reverse_key(key), ACK, TX, -1, 64, now)
        desc = TransmitDescriptor(packet.key, core_id)
        self.nic.tx(packet, desc, now)

    # -- workload scheduling -------------------------------------------------------

    def _schedule_streams(self):
        scenario = self.scenario
        plans = spawn_streams(scenario, self.rng)
        cadence = scenario.host.syscall_cadence_us
        cadence_ns = None if cadence is None else int(cadence * US)
        for plan in plans:
            rule = scenario.app_rule_for_port(plan.port)
            initial = rule.cores[plan.index % len(rule.cores)]
            proc = AppProcess(
                pid=plan.index,
                core=initial,
                allowed_cores=tuple(rule.cores),
                cadence_ns=cadence_ns,
            )
            self.host.add_flow(plan.key, proc)
            syn, synack, ack = make_handshake_packets(plan)
            self.sim.schedule(plan.syn_at, lambda p=syn: self.nic.rx(p, self.sim.now()))
            self.sim.schedule(plan.synack_at, lambda p=synack: self._tx_synack(p))
            self.sim.schedule(plan.ack_at, lambda p=ack: self.nic.rx(p, self.sim.now()))
            for seq, at in enumerate(plan.data_times):
                pkt = Packet(plan.key, DATA, RX, seq, scenario.traffic.packet_bytes, at)
                self.sim.schedule(at, lambda p=pkt: self.nic.rx(p, self.sim.now()))
            self.generated_data += len(plan.data_times)
            # The app begins issuing receive calls once its stream is up.
            self.host.start_process(proc.pid, plan.ack_at + 1)

    def _tx_synack(self, packet: Packet):
        # The kernel answers the SYN from whichever core the handshake was
        # processed on; before any steering entry exists that is the hash
        # fallback core.
        core = self.nic.fallback_core(reverse_key(packet.key))
        self.nic.tx(packet, TransmitDescriptor(packet.key, core), self.sim.now())

    def _schedule_worst_case(self):
        scenario = self.scenario
        D = scenario.nic.ring_capacity
        service_ns = self.cores[0].service_ns
        events = adversarial_migration_schedule(D, service_ns)

        old_queue, new_core = 0, 1
        victim_key = self._find_key_for_queue(old_queue, scenario.traffic.ports[0])
        filler_key = self._find_key_for_queue(
            old_queue, scenario.traffic.ports[0], skip={victim_key}
        )

        # Victim flow is admitted via a scripted handshake well before the
        # migration; its app never calls receive so everything stays in
        # interrupt context and the schedule is exact. The filler flow is
        # never admitted and rides the hash fallback onto the same queue.
        proc = AppProcess(pid=0, core=0, allowed_cores=(0,), cadence_ns=None)
        self.host.add_flow(victim_key, proc)
        filler_proc = AppProcess(pid=1, core=0, allowed_cores=(0,), cadence_ns=None)
        self.host.add_flow(filler_key, filler_proc)

        gap = int(scenario.traffic.handshake_gap_us * US)
        plan = StreamPlan(0, victim_key, victim_key.dst_port, 0, gap, 2 * gap, [])
        syn, synack, ack = make_handshake_packets(plan)
        self.sim.schedule(plan.syn_at, lambda: self.nic.rx(syn, self.sim.now()))
        self.sim.schedule(plan.synack_at, lambda: self._tx_synack(synack))
        self.sim.schedule(plan.ack_at, lambda: self.nic.rx(ack, self.sim.now()))

        size = scenario.traffic.packet_bytes
        filler_seq = 0
        for ev in events:
            if ev.role == "filler":
                pkt = Packet(filler_key, DATA, RX, filler_seq, size, ev.at)
                filler_seq += 1
                self.sim.schedule(ev.at, lambda p=pkt: self.nic.rx(p, self.sim.now()))
                self.generated_data += 1
            elif ev.role == "victim_data":
                pkt = Packet(victim_key, DATA, RX, ev.seq, size, ev.at)
                self.sim.schedule(ev.at, lambda p=pkt: self.nic.rx(p, self.sim.now()))
                self.generated_data += 1
            elif ev.role == "migrate":
                packet = Packet(reverse_key(victim_key), ACK, TX, -1, 64, ev.at)
                desc = TransmitDescriptor(packet.key, new_core)
                self.sim.schedule(ev.at, lambda p=packet, d=desc: self.nic.tx(p, d, self.sim.now()))

    def _find_key_for_queue(self, queue: int, dst_port: int, skip=()) -> FlowKey:
        """Search the ephemeral range for a source port whose hash fallback
        lands on the wanted queue; deterministic given the RSS config."""
        traffic = self.scenario.traffic
        for port in range(EPHEMERAL_START, EPHEMERAL_END):
            key = FlowKey(traffic.src_addr, traffic.dst_addr, PROTO_TCP, port, dst_port)
            if key in skip:
                continue
            if self.nic.fallback_queue(key) == queue:
                return key
        raise RuntimeError(f"no ephemeral port maps to queue {queue}")

    # -- periodic machinery ---------------------------------------------------------

    def _schedule_periodics(self):
        tick_ns = int(self.scenario.scheduler.tick_us * US)
        if tick_ns > 0 and self.scenario.scheduler.mode != "pinned":
            def tick():
                self.host.scheduler_tick(self.sim.now())
                self.sim.schedule_after(tick_ns, tick)

            self.sim.schedule(tick_ns, tick)

        period = self.scenario.scheduler.forced_migration_period_us
        if period:
            period_ns = int(period * US)

            def alternate():
                self.host.force_alternate(self.sim.now())
                self.sim.schedule_after(period_ns, alternate)

            self.sim.schedule(period_ns, alternate)

        if self.table is not None:
            def sweep():
                self.table.age(self.sim.now())
                self.sim.schedule_after(AGE_SWEEP_INTERVAL_NS, sweep)

            self.sim.schedule(AGE_SWEEP_INTERVAL_NS, sweep)

    # -- run ---------------------------------------------------------------------

    def run(self) -> RunResult:
        if self.scenario.kind == "worst_case":
            self._schedule_worst_case()
        else:
            self._schedule_streams()
        self._schedule_periodics()
        self.sim.run_until(self.duration_ns)
        return self._collect()

    # -- reporting ----------------------------------------------------------------

    def _warm_up_end(self) -> dict:
        """Per flow, the steering warm-up horizon for affinity scoring: the
        last transition flush if the flow ever migrated, else its first
        delivery. Before that point the NIC cannot yet know the app core."""
        out = {}
        for key, sock in self.host.sockets.items():
            if key in self.flush_times:
                out[key] = self.flush_times[key]
            elif sock.delivered:
                out[key] = sock.delivered[0].t
            else:
                out[key] = -1
        return out

    def _collect(self) -> RunResult:
        delivered = {key: sock.delivered for key, sock in self.host.sockets.items()}
        warm_up = self._warm_up_end()
        flow_aff, data_aff = affinity_scores(delivered, warm_up)
        proxies = contention_proxy(
            delivered,
            migrations=self.host.migrations,
            lock_conflicts=self.host.stats.lock_conflicts,
            processor_of=lambda c: self._processor_of[c],
            warm_up_end=warm_up,
        )
        stats = self.host.stats
        delivered_total = stats.delivered_interrupt + stats.delivered_process
        delivered_data = sum(
            1 for recs in delivered.values() for r in recs if r.kind == DATA
        )
        hold_delays = self.nic.hold_delays
        t_timer_ns = int(self.scenario.flow_table.t_timer_us * US)
        histogram = held_delay_histogram(hold_delays, t_timer_ns)

        queue_stats = {}
        drops = 0
        interrupts = 0
        for ring in self.nic.rings:
            queue_stats[ring.queue_id] = {
                "queued": ring.enqueued,
                "dropped": ring.dropped,
                "interrupts": ring.interrupts,
                "max_depth": ring.max_depth,
            }
            drops += ring.dropped
            interrupts += ring.interrupts

        if self.table is not None:
            ts = self.table.stats
            handshakes = ts.handshakes_completed
            admitted = ts.admitted
            rejected_bucket = ts.rejected_bucket_full
            rejected_table = ts.rejected_table_full
            evictions = ts.evictions
            peak_entries = ts.peak_entries
            transitions = ts.transitions_started
            held_total = ts.held_packets_total
            peak_held = ts.peak_held_bytes
            memory_peak = memory_estimate(peak_entries, 4, peak_held)
        else:
            handshakes = admitted = rejected_bucket = rejected_table = 0
            evictions = peak_entries = transitions = held_total = peak_held = 0
            memory_peak = 0

        report = RunReport(
            scenario=self.scenario.name,
            seed=self.seed,
            mode=self.scenario.nic.mode,
            duration_us=self.scenario.duration_us,
            generated_data=self.generated_data,
            delivered_data=delivered_data,
            delivered_interrupt=stats.delivered_interrupt,
            delivered_process=stats.delivered_process,
            process_context_fraction=(
                stats.delivered_process / delivered_total if delivered_total else 0.0
            ),
            reordering_ratio=reordering_ratio(delivered),
            handshakes=handshakes,
            admitted=admitted,
            rejected_bucket_full=rejected_bucket,
            rejected_table_full=rejected_table,
            admitted_fraction=admitted_fraction(admitted, handshakes),
            evictions=evictions,
            peak_entries=peak_entries,
            transitions=transitions,
            held_packets=held_total,
            peak_held_bytes=peak_held,
            held_delay_max_ns=histogram.max_delay,
            held_delay_mean_ns=histogram.mean_delay,
            table_memory_peak_bytes=memory_peak,
            drops=drops,
            interrupts=interrupts,
            migrations=len(self.host.migrations),
            acks_sent=self.nic.acks_sent,
            flow_affinity=flow_aff,
            data_affinity=data_aff,
            cross_core_packets=proxies["cross_core_packets"],
            cross_processor_packets=proxies["cross_processor_packets"],
            alternations=proxies["alternations"],
            lock_conflict_events=proxies["lock_conflict_events"],
            queue_stats=queue_stats,
        )
        return RunResult(
            report=report,
            delivered=delivered,
            warm_up_end=warm_up,
            hold_delays=hold_delays,
            table_stats=self.table.stats if self.table else None,
            queue_stats=queue_stats,
            host_stats=stats,
            migrations=self.host.migrations,
        )


def run_scenario(scenario: Scenario, seed: int | None = None) -> RunResult:
    return Engine(scenario, seed=seed).run()
