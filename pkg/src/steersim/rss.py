"""Classic receive-side-scaling classification.

Field selection -> Toeplitz hash -> low-bit mask -> queue lookup, with both
lookup styles found in deployed stacks: a masked indirection table and a
plain hash-mod-queues direct map. All functions are pure over immutable
configuration and safe to call from any thread.
"""

import ipaddress
from dataclasses import dataclass, field
from functools import lru_cache

# Well-known 40-byte verification key from the public RSS specification.
# Scenarios may override it with any hex string of sufficient length.
DEFAULT_RSS_KEY = bytes.fromhex(
    "6d5a56da255b0ec24167253d43a38fb0"
    "d0ca2bcbae7b30b477cb2da38030f20c"
    "6a42b73bbeac01fa"
)

_CANONICAL_FIELDS = ("src_addr", "dst_addr", "src_port", "dst_port", "protocol")


class KeyTooShortError(ValueError):
    """The key must cover the hash input plus the 32-bit sliding window."""


@dataclass(frozen=True)
class HashFields:
    """Which packet header fields feed the hash. At least one must be set."""

    src_addr: bool = True
    dst_addr: bool = True
    src_port: bool = True
    dst_port: bool = True
    protocol: bool = False

    def __post_init__(self):
        if not any(getattr(self, name) for name in _CANONICAL_FIELDS):
            raise ValueError("hash field selection enables no fields")

    @classmethod
    def from_names(cls, names) -> "HashFields":
        names = set(names)
        unknown = names - set(_CANONICAL_FIELDS)
        if unknown:
            raise ValueError(f"unknown hash fields: {sorted(unknown)}")
        return cls(**{name: name in names for name in _CANONICAL_FIELDS})


@dataclass(frozen=True)
class IndirectionTable:
    """Array of queue ids indexed by the masked low bits of the hash."""

    entries: tuple
    mask_bits: int

    def __post_init__(self):
        if len(self.entries) != (1 << self.mask_bits):
            raise ValueError(
                f"indirection table has {len(self.entries)} entries, "
                f"expected 2^{self.mask_bits}"
            )

    @classmethod
    def from_list(cls, entries) -> "IndirectionTable":
        n = len(entries)
        if n <= 0 or n & (n - 1):
            raise ValueError("indirection table size must be a power of two")
        return cls(tuple(entries), n.bit_length() - 1)


@lru_cache(maxsize=None)
def _packed_addr(addr: str) -> bytes:
    return ipaddress.ip_address(addr).packed


def select_fields(key, hash_fields: HashFields) -> bytes:
    """Concatenate the enabled fields of a flow key in canonical order.

    Order is (src addr, dst addr, src port, dst port, protocol), all in
    network byte order, so two packets of one flow always produce the same
    byte sequence.
    """
    parts = []
    if hash_fields.src_addr:
        parts.append(_packed_addr(key.src_addr))
    if hash_fields.dst_addr:
        parts.append(_packed_addr(key.dst_addr))
    if hash_fields.src_port:
        parts.append(key.src_port.to_bytes(2, "big"))
    if hash_fields.dst_port:
        parts.append(key.dst_port.to_bytes(2, "big"))
    if hash_fields.protocol:
        parts.append(key.protocol.to_bytes(1, "big"))
    return b"".join(parts)


def toeplitz_hash(key: bytes, data: bytes) -> int:
    """Standard Toeplitz hash: for each set input bit, XOR in the 32-bit
    window of the key starting at that bit position (big-endian bit order).
    """
    if len(key) < len(data) + 4:
        raise KeyTooShortError(
            f"key of {len(key)} bytes cannot cover {len(data)} input bytes"
        )
    # Maintain the 32-bit window as the top bits of an integer shifted along.
    window = int.from_bytes(key[: len(data) + 4], "big")
    shift = len(data) * 8
    result = 0
    for byte in data:
        for bit in range(7, -1, -1):
            if byte & (1 << bit):
                result ^= (window >> shift) & 0xFFFFFFFF
            shift -= 1
    return result


def indirection_lookup(hash_value: int, table: IndirectionTable) -> int:
    return table.entries[hash_value & ((1 << table.mask_bits) - 1)]


def direct_map_lookup(hash_value: int, num_queues: int) -> int:
    """Linux/FreeBSD style: no indirection table, hash modulo queue count."""
    if num_queues < 1:
        raise ValueError("need at least one queue")
    return hash_value % num_queues


@dataclass
class RssEngine:
    """Bundles key, field selection and lookup style; caches per-flow results.

    The indirection table is static during a run; rebalancing policy is an
    OS concern outside this model.
    """

    key: bytes = DEFAULT_RSS_KEY
    hash_fields: HashFields = field(default_factory=HashFields)
    num_queues: int = 4
    table: IndirectionTable | None = None  # None selects direct mapping
    _cache: dict = field(default_factory=dict, repr=False)

    def hash_of(self, flow_key) -> int:
        return toeplitz_hash(self.key, select_fields(flow_key, self.hash_fields))

    def queue_for(self, flow_key) -> int:
        queue = self._cache.get(flow_key)
        if queue is None:
            h = self.hash_of(flow_key)
            if self.table is not None:
                queue = indirection_lookup(h, self.table)
            else:
                queue = direct_map_lookup(h, self.num_queues)
            self._cache[flow_key] = queue
        return queue
