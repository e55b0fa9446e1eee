"""
Control-plane vocabulary: addresses, frames, match fields, actions, flow
rules and controller<->switch messages.

Wire sizes are accounting constants, not a binary encoding.
"""

import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import FrozenSet, Optional, Tuple, Union

from ..utils.errors import FrameError, ParseError

ETH_IPV4 = 0x0800
ETH_ARP = 0x0806
ETH_LLDP = 0x88CC
ETH_JUMBO = 0x8870

DEFAULT_RECOGNIZED_ETHERTYPES: FrozenSet[int] = frozenset({ETH_IPV4, ETH_ARP, ETH_LLDP})
JUMBO_ETHERTYPES: FrozenSet[int] = frozenset({ETH_JUMBO})

ETH_HEADER_BYTES = 14
MAX_PAYLOAD = 1500
MAX_JUMBO_PAYLOAD = 9000

# Encapsulation overhead of a carried frame (Ethernet, IP, TCP, OpenFlow, Ethernet, IP, UDP).
PACKET_IN_OVERHEAD = 110
PACKET_OUT_OVERHEAD = 108

OFP_FLOW_PERMANENT = None


@dataclass(frozen=True, order=True)
class MacAddr:
    """48-bit MAC address; renders as lowercase ``aa:bb:cc:dd:ee:ff``."""
    octets: bytes

    def __post_init__(self):
        if len(self.octets) != 6:
            raise FrameError(f"MAC address needs 6 octets, got {len(self.octets)}")

    @classmethod
    def parse(cls, text: str) -> "MacAddr":
        parts = text.strip().split(":")
        if len(parts) != 6:
            raise ParseError(f"invalid MAC address: {text!r}")
        try:
            return cls(bytes(int(p, 16) for p in parts))
        except ValueError as e:
            raise ParseError(f"invalid MAC address: {text!r}") from e

    @classmethod
    def from_int(cls, value: int) -> "MacAddr":
        return cls(value.to_bytes(6, "big"))

    def to_int(self) -> int:
        return int.from_bytes(self.octets, "big")

    @property
    def is_multicast(self) -> bool:
        return bool(self.octets[0] & 0x01)

    @property
    def is_local(self) -> bool:
        return bool(self.octets[0] & 0x02)

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    def __repr__(self) -> str:
        return f"MacAddr({self})"


BROADCAST = MacAddr(b"\xff" * 6)


def host_mac(index: int) -> MacAddr:
    """``00:00:00:00:00:NN`` addressing used by the scenario topologies."""
    return MacAddr.from_int(index)


class Role(str, Enum):
    MASTER = "Master"
    EQUAL = "Equal"
    SLAVE = "Slave"


class PacketInReason(str, Enum):
    TABLE_MISS = "TableMiss"
    ACTION = "Action"


class FlowModOp(str, Enum):
    ADD = "Add"
    DELETE_STRICT = "DeleteStrict"


class FlowRemovedReason(str, Enum):
    IDLE_TIMEOUT = "IdleTimeout"
    DELETE = "Delete"


@dataclass(frozen=True)
class Frame:
    """
    Ethernet frame with abstract transport fields.

    ``tag`` and ``born`` are simulator bookkeeping (workload flow label and
    creation time); they are invisible to matching, rendering and equality.
    """
    src: MacAddr
    dst: MacAddr
    ethertype: int = ETH_IPV4
    payload: bytes = b""
    tp_proto: Optional[str] = None
    tp_src: Optional[int] = None
    tp_dst: Optional[int] = None
    tcp_flags: FrozenSet[str] = frozenset()
    tag: str = field(default="", compare=False)
    born: int = field(default=0, compare=False)

    def __post_init__(self):
        if not 0 <= self.ethertype <= 0xFFFF:
            raise FrameError(f"ethertype out of range: {self.ethertype}")
        limit = MAX_JUMBO_PAYLOAD if self.ethertype in JUMBO_ETHERTYPES else MAX_PAYLOAD
        if len(self.payload) > limit:
            raise FrameError(
                f"payload of {len(self.payload)} bytes exceeds {limit} for ethertype 0x{self.ethertype:04x}"
            )
        for port in (self.tp_src, self.tp_dst):
            if port is not None and not 0 <= port <= 0xFFFF:
                raise FrameError(f"transport port out of range: {port}")

    @property
    def wire_size(self) -> int:
        return ETH_HEADER_BYTES + len(self.payload)

    @property
    def digest(self) -> str:
        return hashlib.md5(self.payload).hexdigest()[:8]

    def with_dst(self, dst: MacAddr) -> "Frame":
        return replace(self, dst=dst)

    def summary(self) -> "FrameSummary":
        return FrameSummary(
            src=self.src,
            dst=self.dst,
            ethertype=self.ethertype,
            tp_proto=self.tp_proto,
            tp_src=self.tp_src,
            tp_dst=self.tp_dst,
            tcp_flags=self.tcp_flags,
            length=len(self.payload),
            digest=self.digest,
        )


@dataclass(frozen=True)
class FrameSummary:
    """What a trace keeps of a frame: headers, payload length and digest."""
    src: MacAddr
    dst: MacAddr
    ethertype: int
    tp_proto: Optional[str]
    tp_src: Optional[int]
    tp_dst: Optional[int]
    tcp_flags: FrozenSet[str]
    length: int
    digest: str

    @property
    def identity(self) -> Tuple[str, str, int, str]:
        return (str(self.src), str(self.dst), self.ethertype, self.digest)


@dataclass(frozen=True)
class MatchFields:
    """OpenFlow-style match; ``None`` fields are wildcards."""
    in_port: Optional[int] = None
    dl_src: Optional[MacAddr] = None
    dl_dst: Optional[MacAddr] = None
    ethertype: Optional[int] = None
    tp_src: Optional[int] = None
    tp_dst: Optional[int] = None
    tcp_flags: Optional[FrozenSet[str]] = None

    def matches(self, frame: Union[Frame, FrameSummary], in_port: Optional[int]) -> bool:
        if self.in_port is not None and self.in_port != in_port:
            return False
        if self.dl_src is not None and self.dl_src != frame.src:
            return False
        if self.dl_dst is not None and self.dl_dst != frame.dst:
            return False
        if self.ethertype is not None and self.ethertype != frame.ethertype:
            return False
        if self.tp_src is not None and self.tp_src != frame.tp_src:
            return False
        if self.tp_dst is not None and self.tp_dst != frame.tp_dst:
            return False
        if self.tcp_flags is not None and not self.tcp_flags <= frame.tcp_flags:
            return False
        return True

    def references(self, mac: MacAddr) -> bool:
        return self.dl_src == mac or self.dl_dst == mac


@dataclass(frozen=True)
class Output:
    port: int


@dataclass(frozen=True)
class SetDlDst:
    mac: MacAddr


@dataclass(frozen=True)
class Resubmit:
    pass


@dataclass(frozen=True)
class Drop:
    pass


@dataclass(frozen=True)
class ToController:
    pass


Action = Union[Output, SetDlDst, Resubmit, Drop, ToController]


@dataclass
class FlowRule:
    """A flow table entry. Counters only grow."""
    cookie: int
    priority: int
    match: MatchFields
    actions: Tuple[Action, ...]
    idle_timeout: Optional[int] = OFP_FLOW_PERMANENT
    install_time: int = 0
    last_hit: int = 0
    packet_count: int = 0
    byte_count: int = 0

    def __post_init__(self):
        if not 0 <= self.priority <= 0xFFFF:
            raise ValueError(f"priority out of range: {self.priority}")
        self.actions = tuple(self.actions)
        self.last_hit = max(self.last_hit, self.install_time)

    @property
    def key(self) -> Tuple[int, MatchFields]:
        return (self.priority, self.match)

    def hit(self, frame: Frame, now: int) -> None:
        self.packet_count += 1
        self.byte_count += frame.wire_size
        self.last_hit = max(self.last_hit, now)

    def installed_copy(self, now: int) -> "FlowRule":
        """Fresh table entry for this rule template, counters zeroed."""
        return replace(self, install_time=now, last_hit=now, packet_count=0, byte_count=0)


# Controller <-> switch messages


@dataclass(frozen=True)
class Hello:
    pass


@dataclass(frozen=True)
class FeaturesRequest:
    pass


@dataclass(frozen=True)
class FeaturesReply:
    dpid: int


@dataclass(frozen=True)
class PacketIn:
    in_port: int
    frame: Frame
    reason: PacketInReason = PacketInReason.TABLE_MISS


@dataclass(frozen=True)
class PacketOut:
    actions: Tuple[Action, ...]
    frame: Frame


@dataclass(frozen=True)
class FlowMod:
    op: FlowModOp
    rule: FlowRule


@dataclass(frozen=True)
class FlowRemoved:
    cookie: int
    match: MatchFields
    reason: FlowRemovedReason
    priority: int = 0


@dataclass(frozen=True)
class RoleRequest:
    role: Role


@dataclass(frozen=True)
class RoleReply:
    role: Role


@dataclass(frozen=True)
class Disconnect:
    reason: str


ControlMessage = Union[
    Hello, FeaturesRequest, FeaturesReply, PacketIn, PacketOut,
    FlowMod, FlowRemoved, RoleRequest, RoleReply, Disconnect,
]


def message_kind(msg: ControlMessage) -> str:
    """Name used in traces; FlowMods are split by operation."""
    if isinstance(msg, FlowMod):
        return "FlowAdd" if msg.op is FlowModOp.ADD else "FlowDelete"
    return type(msg).__name__


def wire_bytes(msg: ControlMessage) -> int:
    """Bytes a message occupies on the control channel."""
    if isinstance(msg, PacketIn):
        return len(msg.frame.payload) + PACKET_IN_OVERHEAD
    if isinstance(msg, PacketOut):
        return len(msg.frame.payload) + PACKET_OUT_OVERHEAD
    if isinstance(msg, (Hello, FeaturesRequest)):
        return 8
    if isinstance(msg, FeaturesReply):
        return 32
    if isinstance(msg, (RoleRequest, RoleReply)):
        return 24
    if isinstance(msg, FlowMod):
        return 56 + 8 * len(msg.rule.actions)
    if isinstance(msg, FlowRemoved):
        return 88
    if isinstance(msg, Disconnect):
        return 8 + len(msg.reason.encode("utf-8"))
    raise TypeError(f"not a control message: {msg!r}")
