"""Multi-queue NIC model: receive classification into per-core ring buffers
and the transmit path that feeds core ids back into the steering table.

Queue i is pinned to core i; an interrupt is raised only on a ring's
empty-to-non-empty edge, and the host then drains until empty.
"""

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .flowtable import FlowTable, SteerDecision, TxOutcome, search_time
from .flows import FlowKey, Packet
from .rss import RssEngine

MODE_RSS = "rss"
MODE_FLOWSTEER = "flowsteer"


class Placement(Enum):
    QUEUED = "queued"
    HELD_BY_TABLE = "held"
    DROPPED = "dropped"


@dataclass
class RxOutcome:
    placement: Placement
    queue: int | None = None
    depth: int | None = None


@dataclass(frozen=True)
class TransmitDescriptor:
    """Outgoing packet metadata: the 5-tuple in transmit direction plus the
    core that performed the network processing (one byte, up to 256 cores)."""

    key: FlowKey
    core_id: int

    def __post_init__(self):
        if not 0 <= self.core_id <= 255:
            raise ValueError("core id must fit one byte")


@dataclass
class RingBuffer:
    queue_id: int
    capacity: int
    _slots: deque = field(default_factory=deque)
    offered_direct: int = 0
    offered_flush: int = 0
    enqueued: int = 0
    dropped: int = 0
    max_depth: int = 0
    interrupts: int = 0

    def push(self, packet: Packet, via_flush: bool = False) -> bool:
        if via_flush:
            self.offered_flush += 1
        else:
            self.offered_direct += 1
        if len(self._slots) >= self.capacity:
            self.dropped += 1
            return False
        self._slots.append(packet)
        self.enqueued += 1
        if len(self._slots) > self.max_depth:
            self.max_depth = len(self._slots)
        return True

    def pop(self) -> Packet | None:
        if not self._slots:
            return None
        return self._slots.popleft()

    def depth(self) -> int:
        return len(self._slots)


@dataclass
class NicConfig:
    num_queues: int = 4
    ring_capacity: int = 256
    mode: str = MODE_FLOWSTEER
    latency_accounting: bool = False
    link_latency_ns: int = 10_000

    def validate(self):
        if self.num_queues < 1:
            raise ValueError("need at least one queue")
        if self.ring_capacity < 1:
            raise ValueError("ring capacity must be positive")
        if self.mode not in (MODE_RSS, MODE_FLOWSTEER):
            raise ValueError(f"unknown NIC mode {self.mode!r}")
        return self


class Nic:
    """Receive pipeline plus transmit-descriptor observation.

    `interrupt_cb(queue_id)` fires on a ring's empty->non-empty edge.
    In flow-steering mode a FlowTable must be attached; RSS mode ignores it.
    """

    def __init__(self, config: NicConfig, engine: RssEngine, table: FlowTable | None,
                 sim, interrupt_cb):
        self.config = config.validate()
        if config.mode == MODE_FLOWSTEER and table is None:
            raise ValueError("flow-steering mode requires a flow table")
        self.engine = engine
        self.table = table
        self.sim = sim
        self._interrupt_cb = interrupt_cb
        self.rings = [RingBuffer(q, config.ring_capacity) for q in range(config.num_queues)]
        self.acks_sent = 0
        self.hold_delays: list[int] = []  # flush time minus arrival, per held packet
        self._pipeline_free = 0  # serial lookup pipeline, latency accounting only

    def core_of_queue(self, queue_id: int) -> int:
        return queue_id

    def queue_of_core(self, core_id: int) -> int:
        return core_id

    def fallback_queue(self, key: FlowKey) -> int:
        return self.engine.queue_for(key)

    def fallback_core(self, key: FlowKey) -> int:
        return self.core_of_queue(self.fallback_queue(key))

    # -- receive path ----------------------------------------------------------

    def rx(self, packet: Packet, now: int) -> RxOutcome:
        if self.table is not None and self.config.mode == MODE_FLOWSTEER:
            self.table.on_rx_connection_tracking(packet, now)
            decision, core, position = self.table.steer(
                packet, now, want_position=self.config.latency_accounting
            )
            if decision is SteerDecision.HELD:
                return RxOutcome(Placement.HELD_BY_TABLE)
            if decision is SteerDecision.DIRECT:
                queue = self.queue_of_core(core)
            else:
                queue = self.fallback_queue(packet.key)
            if self.config.latency_accounting:
                return self._enqueue_after_lookup(queue, packet, now, position)
        else:
            queue = self.fallback_queue(packet.key)
        return self._enqueue(queue, packet)

    def _enqueue_after_lookup(self, queue: int, packet: Packet, now: int,
                              position: int) -> RxOutcome:
        # The lookup pipeline is serial: a packet cannot overtake the one
        # ahead of it even if its own chain walk is shorter.
        done = max(now, self._pipeline_free) + search_time(position)
        self._pipeline_free = done
        self.sim.schedule(done, lambda: self._enqueue(queue, packet))
        return RxOutcome(Placement.QUEUED, queue, None)

    def _enqueue(self, queue: int, packet: Packet, via_flush: bool = False) -> RxOutcome:
        ring = self.rings[queue]
        if not ring.push(packet, via_flush=via_flush):
            return RxOutcome(Placement.DROPPED, queue, ring.depth())
        if ring.depth() == 1:
            ring.interrupts += 1
            self._interrupt_cb(queue)
        return RxOutcome(Placement.QUEUED, queue, ring.depth())

    # -- transmit path ----------------------------------------------------------

    def tx(self, packet: Packet, desc: TransmitDescriptor, now: int) -> TxOutcome | None:
        """Observe an outgoing packet. Returns the table update outcome in
        flow-steering mode, None under plain RSS. The frame itself reaches the
        peer after the link latency; the peer model is open-loop, so only the
        table side effects matter here."""
        self.acks_sent += 1
        if self.table is None or self.config.mode != MODE_FLOWSTEER:
            return None
        self.table.note_tx_packet(packet, now)
        outcome = self.table.observe_tx(desc, now)
        return outcome

    def on_hold_timer(self, key: FlowKey):
        """Flush a flow's held packets to its (new) core's ring, FIFO."""
        now = self.sim.now()
        core, packets = self.table.on_timer_expire(key, now)
        queue = self.queue_of_core(core)
        for packet in packets:
            self.hold_delays.append(now - packet.held_at)
            packet.held_at = None
            self._enqueue(queue, packet, via_flush=True)

    def drain(self, queue_id: int, now: int) -> Packet | None:
        return self.rings[queue_id].pop()
