"""Flow identity and simulated frames."""

from dataclasses import dataclass

PROTO_TCP = 6
PROTO_UDP = 17

# Packet kinds.
SYN = "SYN"
SYNACK = "SYNACK"
ACK = "ACK"
DATA = "DATA"
FIN = "FIN"

RX = "rx"
TX = "tx"


@dataclass(frozen=True)
class FlowKey:
    """Transport 5-tuple, always expressed in the receive direction."""

    src_addr: str
    dst_addr: str
    protocol: int
    src_port: int
    dst_port: int

    def reversed(self) -> "FlowKey":
        return FlowKey(
            self.dst_addr, self.src_addr, self.protocol, self.dst_port, self.src_port
        )


def reverse_key(key: FlowKey) -> FlowKey:
    """Map an outgoing packet's 5-tuple to its receive-direction flow key.

    Swaps addresses and ports, keeps the protocol; applying it twice is the
    identity.
    """
    return key.reversed()


@dataclass
class Packet:
    """One simulated frame.

    `seq` is a gapless per-flow sequence number for DATA packets and -1 for
    control packets. `sent_at` is the scheduled arrival (rx) or transmit (tx)
    timestamp; `held_at` is set while the frame sits in a steering table's
    transition list.
    """

    key: FlowKey
    kind: str
    direction: str
    seq: int
    size: int
    sent_at: int
    held_at: int | None = None
