"""NIC-resident flow-to-core steering table.

Maps receive-direction 5-tuples to the core that should consume them.
Entries are created when a three-way handshake completes, updated by the
core id carried on outgoing packets, and aged out on idle timeout. A core
change puts the entry into a transition state that holds arriving packets
until a timer expires, which is what preserves in-order delivery across
migrations.
"""

from dataclasses import dataclass, field
from enum import Enum

from .flows import ACK, SYN, SYNACK, PROTO_TCP, FlowKey, Packet, reverse_key
from .rss import _packed_addr


class SteerDecision(Enum):
    DIRECT = "direct"
    HELD = "held"
    FALLBACK = "fallback"


class TxOutcome(Enum):
    NO_ENTRY = "no_entry"
    SAME_CORE = "same_core"
    TRANSITION_STARTED = "transition_started"


# Handshake tracker states; completion deletes the tracker entry.
SYN_SEEN = "syn_seen"
SYNACK_SEEN = "synack_seen"


class TimerBugError(RuntimeError):
    """A hold timer fired for an entry that is not in transition."""


@dataclass
class FlowTableConfig:
    num_buckets: int = 256
    max_list_size: int = 6
    max_entries: int = 10_000
    t_timer_ns: int = 100_000  # hold duration on core change
    t_delete_ns: int = 1_000_000_000  # idle eviction timeout
    t_delete_pressure_ns: int = 100_000_000  # used when the table runs hot
    pressure_threshold: float = 0.9  # occupancy fraction enabling the above

    def validate(self):
        if self.max_list_size <= 0:
            raise ValueError("max_list_size must be positive")
        if self.t_delete_pressure_ns > self.t_delete_ns:
            raise ValueError("pressure timeout must not exceed the idle timeout")
        if not 0 < self.pressure_threshold <= 1:
            raise ValueError("pressure_threshold must be in (0, 1]")
        if self.t_timer_ns < 0 or self.num_buckets < 1 or self.max_entries < 1:
            raise ValueError("invalid flow table configuration")
        return self


@dataclass
class FlowEntry:
    key: FlowKey
    core_id: int
    transition: bool = False
    held: list = field(default_factory=list)
    timer_deadline: int | None = None
    last_activity: int = 0
    bucket: int = 0


@dataclass
class FlowTableStats:
    handshakes_completed: int = 0
    admitted: int = 0
    rejected_bucket_full: int = 0
    rejected_table_full: int = 0
    evictions: int = 0
    peak_entries: int = 0
    transitions_started: int = 0
    held_packets_total: int = 0
    held_bytes: int = 0
    peak_held_bytes: int = 0


def _fmix32(h: int) -> int:
    # murmur3 finalizer; spreads sequential port values across buckets.
    h &= 0xFFFFFFFF
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & 0xFFFFFFFF
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & 0xFFFFFFFF
    h ^= h >> 16
    return h


def _fold_addr(addr: str) -> int:
    packed = _packed_addr(addr)
    folded = 0
    for i in range(0, len(packed), 4):
        folded ^= int.from_bytes(packed[i : i + 4], "big")
    return folded


def bucket_index(key: FlowKey, num_buckets: int, fields=("ports", "addrs")) -> int:
    """Deterministic bucket for a flow key.

    Default input is the port pair XOR-folded with the addresses, so when
    every flow shares one address pair the ports alone spread the table.
    """
    if num_buckets < 1:
        raise ValueError("need at least one bucket")
    v = 0
    if "ports" in fields:
        v ^= (key.src_port << 16) | key.dst_port
    if "addrs" in fields:
        v ^= _fold_addr(key.src_addr)
        v ^= ((_fold_addr(key.dst_addr) << 16) | (_fold_addr(key.dst_addr) >> 16)) & 0xFFFFFFFF
    if "protocol" in fields:
        v ^= key.protocol << 24
    return _fmix32(v) % num_buckets


def memory_estimate(n_entries: int, ip_version: int, held_bytes: int) -> int:
    """Table memory in bytes: 20 per IPv4 entry, 24 more for IPv6, plus the
    bytes currently held for flows in transition."""
    per_entry = 20 if ip_version == 4 else 44
    return n_entries * per_entry + held_bytes


def search_time(position_in_list: int) -> int:
    """Lookup latency in ns for hitting the Nth item of a collision chain."""
    if position_in_list < 1:
        raise ValueError("list positions are 1-based")
    return 260 + 150 * (position_in_list - 1)


class FlowTable:
    """Hash table with chained buckets capped at max_list_size entries.

    Flows are never evicted on collision: once a chain is full, later flows
    with that bucket stay out (steered by plain RSS) until aging frees a
    slot and a later handshake retries.

    `schedule_timer(deadline, key)` is injected by the owning NIC model and
    must arrange a later call to `on_timer_expire`. `fallback_core(key)`
    names the core the hash fallback would pick; new entries start there
    because nothing better is known before the first transmit descriptor.
    """

    def __init__(self, config: FlowTableConfig, schedule_timer, fallback_core):
        self.config = config.validate()
        self._schedule_timer = schedule_timer
        self._fallback_core = fallback_core
        self._buckets: dict[int, list[FlowEntry]] = {}
        self._entries: dict[FlowKey, FlowEntry] = {}
        self._tracker: dict[FlowKey, tuple[str, int]] = {}
        self.stats = FlowTableStats()

    def __len__(self):
        return len(self._entries)

    def get(self, key: FlowKey) -> FlowEntry | None:
        return self._entries.get(key)

    def occupancy(self) -> int:
        return len(self._entries)

    # -- connection tracking -------------------------------------------------

    def on_rx_connection_tracking(self, packet: Packet, now: int) -> FlowEntry | None:
        """Advance handshake state from an incoming packet; admit on the
        final ACK. Rejection (chain or table full) is a counted outcome, not
        an error."""
        if packet.key.protocol != PROTO_TCP or packet.key in self._entries:
            return None
        if packet.kind == SYN:
            self._tracker[packet.key] = (SYN_SEEN, now)
            return None
        if packet.kind == ACK:
            state = self._tracker.get(packet.key)
            if state is not None and state[0] == SYNACK_SEEN:
                del self._tracker[packet.key]
                self.stats.handshakes_completed += 1
                return self._try_admit(packet.key, now)
        return None

    def note_tx_packet(self, packet: Packet, now: int):
        """Outgoing half of handshake monitoring (the SYN-ACK)."""
        if packet.key.protocol != PROTO_TCP or packet.kind != SYNACK:
            return
        key = reverse_key(packet.key)
        state = self._tracker.get(key)
        if state is not None and state[0] == SYN_SEEN:
            self._tracker[key] = (SYNACK_SEEN, now)

    def _try_admit(self, key: FlowKey, now: int) -> FlowEntry | None:
        if len(self._entries) >= self.config.max_entries:
            self.stats.rejected_table_full += 1
            return None
        index = bucket_index(key, self.config.num_buckets)
        bucket = self._buckets.setdefault(index, [])
        if len(bucket) >= self.config.max_list_size:
            self.stats.rejected_bucket_full += 1
            return None
        entry = FlowEntry(
            key, core_id=self._fallback_core(key), last_activity=now, bucket=index
        )
        bucket.append(entry)
        self._entries[key] = entry
        self.stats.admitted += 1
        self.stats.peak_entries = max(self.stats.peak_entries, len(self._entries))
        return entry

    # -- steering ------------------------------------------------------------

    def steer(self, packet: Packet, now: int, want_position: bool = False):
        """Returns (decision, core_id, chain_position).

        DIRECT names the pinned core's queue, HELD appended the packet to the
        entry's transition list, FALLBACK means the caller should route by
        hash. chain_position is 1-based and only computed when the caller
        charges lookup latency; on a miss it is the full chain length walked.
        """
        entry = self._entries.get(packet.key)
        if entry is None:
            position = 1
            if want_position:
                bucket = self._buckets.get(
                    bucket_index(packet.key, self.config.num_buckets), ()
                )
                position = max(1, len(bucket))
            return SteerDecision.FALLBACK, None, position
        position = self._position_of(entry) if want_position else 1
        entry.last_activity = now
        if entry.transition:
            packet.held_at = now
            entry.held.append(packet)
            self.stats.held_packets_total += 1
            self.stats.held_bytes += packet.size
            self.stats.peak_held_bytes = max(
                self.stats.peak_held_bytes, self.stats.held_bytes
            )
            return SteerDecision.HELD, None, position
        return SteerDecision.DIRECT, entry.core_id, position

    def _position_of(self, entry: FlowEntry) -> int:
        return self._buckets[entry.bucket].index(entry) + 1

    # -- updates from the transmit path ---------------------------------------

    def observe_tx(self, desc, now: int) -> TxOutcome:
        """Apply a transmit descriptor's core id to the matching entry.

        A differing core id starts a transition and a hold timer. A further
        change while already in transition retargets the entry but keeps the
        original deadline: the deadline already covers draining the queue the
        flow left first, and extending it would let held packets wait longer
        than one timer period.
        """
        entry = self._entries.get(reverse_key(desc.key))
        if entry is None:
            return TxOutcome.NO_ENTRY
        entry.last_activity = now
        if desc.core_id == entry.core_id:
            return TxOutcome.SAME_CORE
        entry.core_id = desc.core_id
        if not entry.transition:
            entry.transition = True
            entry.timer_deadline = now + self.config.t_timer_ns
            self.stats.transitions_started += 1
            self._schedule_timer(entry.timer_deadline, entry.key)
        return TxOutcome.TRANSITION_STARTED

    def on_timer_expire(self, key: FlowKey, now: int):
        """Leave the transition state; returns (core_id, held packets) with
        the held list in arrival order for enqueueing to the new core."""
        entry = self._entries.get(key)
        if entry is None or not entry.transition:
            raise TimerBugError(f"hold timer fired for non-transition flow {key}")
        flushed = entry.held
        entry.held = []
        entry.transition = False
        entry.timer_deadline = None
        entry.last_activity = now
        self.stats.held_bytes -= sum(p.size for p in flushed)
        return entry.core_id, flushed

    # -- aging ----------------------------------------------------------------

    def age(self, now: int) -> list[FlowKey]:
        """Evict entries idle past the timeout; under occupancy pressure the
        shorter timeout applies. Entries in transition are exempt (their held
        packets must flush first). Stale partial handshakes expire here too."""
        limit = self.config.t_delete_ns
        if len(self._entries) >= self.config.pressure_threshold * self.config.max_entries:
            limit = self.config.t_delete_pressure_ns
        evicted = [
            key
            for key, entry in self._entries.items()
            if not entry.transition and now - entry.last_activity >= limit
        ]
        for key in evicted:
            entry = self._entries.pop(key)
            self._buckets[entry.bucket].remove(entry)
        self.stats.evictions += len(evicted)

        stale = [
            key
            for key, (_, t) in self._tracker.items()
            if now - t >= self.config.t_delete_ns
        ]
        for key in stale:
            del self._tracker[key]
        return evicted
