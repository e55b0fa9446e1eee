"""Channel arithmetic for out-of-band forwarding."""

from dataclasses import dataclass
from typing import NamedTuple

from ..protocol.messages import PACKET_IN_OVERHEAD, PACKET_OUT_OVERHEAD
from ..utils.errors import ZeroPayload


class OobCapacity(NamedTuple):
    packets_per_second: float
    control_bytes_per_packet_in: int
    control_bytes_per_packet_out: int


def oob_capacity(goodput_bps: float, payload_bytes: int) -> OobCapacity:
    """
    PacketIns per second needed to carry ``goodput_bps`` of encapsulated traffic.

    Args:
        goodput_bps: Channel goodput in bits per second
        payload_bytes: Frame payload carried by each PacketIn

    Returns:
        Rate and per-message control-channel byte counts
    """
    if payload_bytes <= 0:
        raise ZeroPayload(f"payload size must be positive, got {payload_bytes}")
    if goodput_bps < 0:
        raise ValueError(f"goodput must be non-negative, got {goodput_bps}")
    per_in = payload_bytes + PACKET_IN_OVERHEAD
    per_out = payload_bytes + PACKET_OUT_OVERHEAD
    return OobCapacity(goodput_bps / (8 * per_in), per_in, per_out)


@dataclass
class ChannelStats:
    """Counters of one teleportation channel, keyed in metrics by the frames' flow tag."""
    name: str
    payload_bytes: int = 0
    control_bytes_in: int = 0
    control_bytes_out: int = 0
    packets_in: int = 0
    packets_out: int = 0
    delivered: int = 0
    delivered_payload: int = 0
    goodput_bps: float = 0.0
    jitter_ns: float = 0.0

    @property
    def lost(self) -> int:
        return max(self.packets_in - self.delivered, 0)

    def record_packet_in(self, payload_len: int) -> None:
        self.packets_in += 1
        self.control_bytes_in += payload_len + PACKET_IN_OVERHEAD

    def record_packet_out(self, payload_len: int) -> None:
        self.packets_out += 1
        self.control_bytes_out += payload_len + PACKET_OUT_OVERHEAD

    def record_delivery(self, payload_len: int) -> None:
        self.delivered += 1
        self.delivered_payload += payload_len
        self.payload_bytes += payload_len

    def finish(self, duration_ns: int, jitter_ns: float = 0.0) -> None:
        """Goodput over the encapsulated PacketIn stream of delivered frames."""
        self.jitter_ns = jitter_ns
        if duration_ns <= 0:
            self.goodput_bps = 0.0
            return
        encapsulated = self.delivered_payload + self.delivered * PACKET_IN_OVERHEAD
        self.goodput_bps = 8 * encapsulated * 1_000_000_000 / duration_ns
