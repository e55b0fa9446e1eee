"""Links between simulated nodes and the control-channel token bucket."""

from dataclasses import dataclass
from typing import Optional

from ..protocol.messages import MAX_JUMBO_PAYLOAD, PACKET_IN_OVERHEAD
from ..utils.durations import MS, SECOND


class TokenBucket:
    """A byte budget refilled at ``rate`` bytes per second of simulated time."""

    def __init__(self, tokens: float, rate: float, now: int = 0):
        self._tokens = tokens
        self._size = tokens
        self._rate = rate
        self._ts = now

    def consume(self, token_count: int, now: int) -> bool:
        """Take ``token_count`` tokens if available at ``now``."""
        if token_count <= self.tokens_at(now):
            self._tokens -= token_count
            return True
        return False

    def tokens_at(self, now: int) -> float:
        if now > self._ts:
            refill = self._rate * (now - self._ts) / SECOND
            self._tokens = min(self._size, self._tokens + refill)
            self._ts = now
        return self._tokens


def control_bucket(capacity_bps: Optional[float], burst: int = 10 * MS) -> Optional[TokenBucket]:
    """Bucket for one switch-to-controller direction; ``None`` means unconstrained."""
    if capacity_bps is None:
        return None
    rate = capacity_bps / 8
    # Always room for one maximal PacketIn.
    return TokenBucket(tokens=max(rate * burst / SECOND, MAX_JUMBO_PAYLOAD + PACKET_IN_OVERHEAD), rate=rate)


@dataclass(frozen=True)
class Wire:
    """One direction of a data link."""
    peer: str
    peer_port: int
    latency: int


@dataclass
class ControlChannel:
    conn_id: int
    switch: str
    controller: str
    latency: int
    bucket: Optional[TokenBucket] = None
