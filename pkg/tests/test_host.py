from steersim.flows import DATA, PROTO_TCP, RX, FlowKey, Packet
from steersim.host import (
    CTX_INTERRUPT,
    CTX_PROCESS,
    MODE_CPUSET,
    MODE_PEAK_PERFORMANCE,
    MODE_PINNED,
    MODE_POWER_SAVING,
    STATE_SLEEPING,
    AppProcess,
    Core,
    DeliveryRecord,
    Host,
    contention_proxy,
)
from steersim.nic import MODE_RSS, Nic, NicConfig
from steersim.rss import RssEngine
from steersim.simkernel import Simulator

SERVICE_NS = 333


def key(sport=40000, dport=5001):
    return FlowKey("10.0.0.1", "10.0.0.2", PROTO_TCP, sport, dport)


def rx_pkt(k, seq=0, at=0, kind=DATA):
    return Packet(k, kind, RX, seq, 1500, at)


class Harness:
    """Host over a real NIC in plain RSS mode so steering is hash-only and
    the host behaviour is isolated."""

    def __init__(self, num_cores=4, scheduler=MODE_PINNED, ack_every=2,
                 processors=((0, 1), (2, 3))):
        self.sim = Simulator()
        proc_of = {}
        for pid, group in enumerate(processors):
            for c in group:
                proc_of[c] = pid
        cores = [Core(c, proc_of.get(c, 0), SERVICE_NS) for c in range(num_cores)]
        engine = RssEngine(num_queues=num_cores)
        self.acks = []
        self.nic = Nic(
            NicConfig(num_queues=num_cores, ring_capacity=256, mode=MODE_RSS),
            engine, None, self.sim,
            interrupt_cb=lambda q: self.sim.schedule(
                self.sim.now(), lambda: self.host.on_interrupt(q)
            ),
        )
        self.host = Host(
            cores, self.sim, self.nic, scheduler_mode=scheduler,
            ack_every=ack_every,
            emit_ack=lambda k, core, now: self.acks.append((k, core, now)),
        )

    def flow(self, k, pid=0, core=0, allowed=None, cadence_ns=None):
        proc = AppProcess(
            pid=pid, core=core,
            allowed_cores=tuple(allowed) if allowed else (core,),
            cadence_ns=cadence_ns,
        )
        return self.host.add_flow(k, proc)

    def inject(self, k, seq, at, queue):
        self.sim.schedule(
            at, lambda: self.nic._enqueue(queue, rx_pkt(k, seq=seq, at=at))
        )


class TestInterruptContext:
    def test_unowned_socket_processes_at_service_rate(self):
        h = Harness()
        k = key()
        sock = h.flow(k)  # idle app, never owns the socket
        for seq in range(5):
            h.inject(k, seq, at=0, queue=0)
        h.sim.run_until(10_000)
        assert len(sock.delivered) == 5
        assert all(r.context == CTX_INTERRUPT and r.core == 0 for r in sock.delivered)
        # First at t=0, then spaced by one service quantum each.
        assert [r.t for r in sock.delivered] == [i * SERVICE_NS for i in range(5)]

    def test_owned_socket_defers_to_backlog(self):
        h = Harness()
        k = key()
        sock = h.flow(k)
        sock.owned_by_user = True
        for seq in range(3):
            h.inject(k, seq, at=0, queue=0)
        h.sim.run_until(5_000)
        assert len(sock.delivered) == 0
        assert [p.seq for p in sock.backlog] == [0, 1, 2]
        assert h.host.stats.deferrals == 3

    def test_empty_queue_handler_exits(self):
        h = Harness()
        h.flow(key())
        h.host.on_interrupt(0)
        assert h.host.handler_active[0] is False
        assert h.host.stats.delivered_interrupt == 0


class TestProcessContext:
    def test_backlog_drained_on_app_core(self):
        h = Harness()
        k = key()
        sock = h.flow(k, core=1, cadence_ns=100_000)
        sock.backlog.extend(rx_pkt(k, seq=s) for s in range(4))
        h.host.start_process(0, first_call_at=10)
        h.sim.run_until(50_000)
        assert len(sock.delivered) == 4
        assert all(r.context == CTX_PROCESS and r.core == 1 for r in sock.delivered)

    def test_sleeping_receiver_woken_by_arrival(self):
        h = Harness()
        k = key()
        sock = h.flow(k, core=1, cadence_ns=100_000)
        h.host.start_process(0, first_call_at=0)
        h.sim.run_until(10)
        assert sock.sleeping and h.host.processes[0].state == STATE_SLEEPING
        h.inject(k, seq=0, at=500, queue=0)
        h.sim.run_until(5_000)
        assert not sock.sleeping
        assert [r.context for r in sock.delivered] == [CTX_PROCESS]
        assert sock.delivered[0].core == 1

    def test_ack_emitted_every_k_and_at_syscall_return(self):
        h = Harness(ack_every=2)
        k = key()
        sock = h.flow(k, core=1, cadence_ns=100_000)
        sock.backlog.extend(rx_pkt(k, seq=s) for s in range(3))
        h.host.start_process(0, first_call_at=0)
        h.sim.run_until(50_000)
        # Two ACKs: the per-2-packets one mid-drain, the residue at return.
        assert len(h.acks) == 2
        assert all(core == 1 for _, core, _ in h.acks)

    def test_empty_backlog_syscall_blocks_without_ack(self):
        h = Harness()
        h.flow(key(), core=1, cadence_ns=100_000)
        h.host.start_process(0, first_call_at=0)
        h.sim.run_until(1_000)
        assert h.acks == []
        assert h.host.stats.syscalls == 1

    def test_deferred_then_drained_exactly_once(self):
        # Packets arriving while owned are delivered once, in process context.
        h = Harness()
        k = key()
        sock = h.flow(k, core=0, cadence_ns=50_000)
        h.host.start_process(0, first_call_at=0)
        for seq in range(6):
            h.inject(k, seq, at=100 + seq * 100, queue=0)
        h.sim.run_until(100_000)
        seqs = sorted(r.seq for r in sock.delivered)
        assert seqs == list(range(6))

    def test_alternation_under_rss_split_placement(self):
        # Interrupts on core 0, app on core 1: deliveries use both cores.
        h = Harness()
        k = key()
        sock = h.flow(k, core=1, cadence_ns=3_000)
        h.host.start_process(0, first_call_at=0)
        for seq in range(40):
            h.inject(k, seq, at=1_000 + seq * 2_000, queue=0)
        h.sim.run_until(200_000)
        contexts = {r.context for r in sock.delivered}
        cores = {r.core for r in sock.delivered}
        assert contexts == {CTX_INTERRUPT, CTX_PROCESS}
        assert cores == {0, 1}
        assert len(sock.delivered) == 40
        seqs = [r.seq for r in sock.delivered]
        assert seqs == sorted(seqs)  # single queue: order survives alternation


class TestLockConflicts:
    def test_cross_core_owned_encounter_counts(self):
        h = Harness()
        k = key()
        sock = h.flow(k, core=1)
        sock.owned_by_user = True
        h.inject(k, seq=0, at=0, queue=0)  # pops on core 0, owner on core 1
        h.sim.run_until(1_000)
        assert h.host.stats.lock_conflicts == 1

    def test_same_core_owned_encounter_does_not_count(self):
        # On one core the two contexts serialize; nothing spins.
        h = Harness()
        k = key()
        sock = h.flow(k, core=0)
        sock.owned_by_user = True
        h.inject(k, seq=0, at=0, queue=0)
        h.sim.run_until(1_000)
        assert h.host.stats.lock_conflicts == 0
        assert h.host.stats.deferrals == 1


class TestScheduler:
    def test_pinned_never_migrates(self):
        h = Harness(scheduler=MODE_PINNED)
        h.flow(key(sport=1), pid=0, core=0)
        h.flow(key(sport=2), pid=1, core=0)
        assert h.host.scheduler_tick(0) == []

    def test_peak_performance_balances(self):
        h = Harness(scheduler=MODE_PEAK_PERFORMANCE, num_cores=2,
                    processors=((0, 1),))
        h.flow(key(sport=1), pid=0, core=0, allowed=(0, 1))
        h.flow(key(sport=2), pid=1, core=0, allowed=(0, 1))
        moves = h.host.scheduler_tick(0)
        assert len(moves) == 1
        t, pid, src, dst = moves[0]
        assert (pid, src, dst) == (0, 0, 1)  # lowest pid moves first

    def test_power_saving_converges_to_processor_zero(self):
        h = Harness(scheduler=MODE_POWER_SAVING)
        h.flow(key(sport=1), pid=0, core=0, allowed=(0, 2))
        h.flow(key(sport=2), pid=1, core=2, allowed=(0, 2))
        moves = h.host.scheduler_tick(0)
        assert len(moves) == 1
        assert moves[0][1] == 1  # the process on processor 1 moved
        assert h.host.processes[1].core in (0, 1)

    def test_cpuset_enforces_partition(self):
        h = Harness(scheduler=MODE_CPUSET)
        h.flow(key(sport=1), pid=0, core=3, allowed=(0, 1))
        moves = h.host.scheduler_tick(0)
        assert len(moves) == 1 and h.host.processes[0].core in (0, 1)

    def test_force_alternate_rotates(self):
        h = Harness()
        h.flow(key(sport=1), pid=0, core=0, allowed=(0, 2))
        h.host.force_alternate(0)
        assert h.host.processes[0].core == 2
        h.host.force_alternate(1)
        assert h.host.processes[0].core == 0
        assert len(h.host.migrations) == 2


class TestContentionProxy:
    def test_single_core_system_all_zero(self):
        recs = [DeliveryRecord(s, s * 10, 0, CTX_INTERRUPT, 0, DATA) for s in range(5)]
        out = contention_proxy({key(): recs})
        assert out["cross_core_packets"] == 0
        assert out["alternations"] == 0
        assert out["lock_conflict_events"] == 0

    def test_cross_core_and_alternations(self):
        recs = [
            DeliveryRecord(0, 0, 0, CTX_INTERRUPT, 1, DATA),
            DeliveryRecord(1, 10, 1, CTX_PROCESS, 1, DATA),
            DeliveryRecord(2, 20, 0, CTX_INTERRUPT, 1, DATA),
        ]
        out = contention_proxy({key(): recs}, processor_of=lambda c: c // 2)
        assert out["cross_core_packets"] == 2
        assert out["alternations"] == 2
        assert out["cross_processor_packets"] == 0
