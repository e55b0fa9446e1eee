"""
Encoder/decoder logic of the four teleportation techniques.

Everything here operates on ``AgentState`` and plain values; the adapters in
``agents.py`` wire it to switches and hosts inside the simulator.
"""

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from ..protocol.messages import (
    ETH_ARP,
    ETH_IPV4,
    ETH_JUMBO,
    JUMBO_ETHERTYPES,
    MAX_JUMBO_PAYLOAD,
    MAX_PAYLOAD,
    FlowRule,
    Frame,
    MacAddr,
    Role,
)
from ..utils.durations import MS
from ..utils.errors import NoSharedPath, NotReady, OutOfRange, Oversize
from ..utils.logger import get_logger
from .secrets import SecretMatrix, secret_dpid

logger = get_logger(__name__)

CHUNK_HEADER = struct.Struct("!IH")
DEFAULT_CHUNK = 1024


class Technique(str, Enum):
    PATH_UPDATE = "PathUpdate"
    PATH_RESET = "PathReset"
    SWITCH_ID = "SwitchId"
    OOB_FORWARD = "OobForward"


class ResetMode(str, Enum):
    PUNT = "punt"
    DELETE = "delete"


@dataclass
class AgentState:
    id: int
    technique: Technique
    matrix: SecretMatrix
    discovered: Set[int] = field(default_factory=set)
    tx_queue: bytearray = field(default_factory=bytearray)
    rx_buffer: bytearray = field(default_factory=bytearray)
    slot: int = 100 * MS
    local_host: Optional[MacAddr] = None
    local_port: Optional[int] = None
    flow: Optional[Tuple[MacAddr, MacAddr]] = None
    mode: ResetMode = ResetMode.DELETE
    evidence: List[Tuple[int, str, int]] = field(default_factory=list)
    sent_bits: List[Tuple[int, int]] = field(default_factory=list)
    rx_bits: List[int] = field(default_factory=list)
    tx_counter: int = 0
    rx_chunks: Dict[int, bytes] = field(default_factory=dict)
    rx_total: Optional[int] = None
    rx_consumed: int = 0

    def __post_init__(self):
        if not 1 <= self.id <= self.matrix.m:
            raise OutOfRange(f"agent id {self.id} outside [1, {self.matrix.m}]")

    def discover(self, peer: int, now: int, identity: str) -> Optional[int]:
        if peer == self.id:
            return None
        if peer not in self.discovered:
            logger.debug(f"agent {self.id} discovered {peer} via {identity}")
        self.discovered.add(peer)
        self.evidence.append((now, identity, peer))
        return peer


# path update


def _announcement(agent: AgentState, mac: MacAddr) -> Frame:
    return Frame(src=mac, dst=agent.local_host, ethertype=ETH_ARP, tag=f"announce-{agent.id}")


def pu_start(agent: AgentState) -> List[Frame]:
    """Announce every identity of row i and column i, once each."""
    if agent.local_host is None:
        raise NotReady(f"agent {agent.id}: no local host learned by the controller yet")
    return [_announcement(agent, agent.matrix.mac(i, j)) for i, j in agent.matrix.row_and_column(agent.id)]


@dataclass(frozen=True)
class PuReaction:
    reannounce: Tuple[Frame, ...] = ()
    discovered: Optional[int] = None


def pu_on_flow_delete(agent: AgentState, deleted_mac: MacAddr, now: int = 0) -> PuReaction:
    """
    React to a Flow-delete naming ``deleted_mac``.

    A row identity X(i, j) is re-announced and reveals j; a column identity
    X(j, i) reveals j without a re-announcement.
    """
    cell = agent.matrix.locate_mac(deleted_mac)
    if cell is None:
        return PuReaction()
    row, col = cell
    if row == agent.id:
        peer = agent.discover(col, now, str(deleted_mac))
        reannounce = (_announcement(agent, deleted_mac),) if agent.local_host is not None else ()
        return PuReaction(reannounce=reannounce, discovered=peer)
    if col == agent.id:
        return PuReaction(discovered=agent.discover(row, now, str(deleted_mac)))
    return PuReaction()


# path reset


class PathResetAction(str, Enum):
    SILENCE = "silence"
    DELETE_OWN_FLOW = "delete"
    PUNT_NEXT_FRAME = "punt"


def shared_rule(agent: AgentState, table: Iterable[FlowRule]) -> Optional[FlowRule]:
    if agent.flow is None:
        return None
    src, dst = agent.flow
    for rule in table:
        if rule.match.dl_src == src and rule.match.dl_dst == dst:
            return rule
    return None


def pr_send_bit(agent: AgentState, bit: int, slot_index: int, table: Sequence[FlowRule] = ()) -> PathResetAction:
    """On/off keying: a 1 perturbs the shared path at the slot start, a 0 stays silent."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    if shared_rule(agent, table) is None:
        raise NoSharedPath(f"agent {agent.id} holds no rule of flow {agent.flow}")
    agent.sent_bits.append((slot_index, bit))
    if bit == 0:
        return PathResetAction.SILENCE
    if agent.mode is ResetMode.DELETE:
        return PathResetAction.DELETE_OWN_FLOW
    return PathResetAction.PUNT_NEXT_FRAME


@dataclass(frozen=True)
class SlotEvent:
    t: int
    kind: str
    redundant: bool = False


def pr_decode_slot(agent: AgentState, slot_events: Iterable[SlotEvent]) -> int:
    bit = int(any(ev.kind == "FlowAdd" and ev.redundant for ev in slot_events))
    agent.rx_bits.append(bit)
    return bit


# switch identification


@dataclass(frozen=True)
class Denied:
    dpid: int


@dataclass(frozen=True)
class Replaced:
    dpid: int


@dataclass(frozen=True)
class RoleAssigned:
    dpid: int
    role: Role


SiOutcome = Union[Denied, Replaced, RoleAssigned]


def si_claims(agent: AgentState) -> List[int]:
    return [secret_dpid(agent.matrix, i, j) for i, j in agent.matrix.row_and_column(agent.id)]


def si_rendezvous_step(agent: AgentState, outcome: SiOutcome, now: int = 0) -> Optional[int]:
    """Contested identities reveal the peer that shares them; an uncontested Master reveals nothing."""
    if isinstance(outcome, RoleAssigned) and outcome.role is Role.MASTER:
        return None
    cell = agent.matrix.locate_dpid(outcome.dpid)
    if cell is None:
        return None
    row, col = cell
    if row == agent.id:
        return agent.discover(col, now, f"dpid:{outcome.dpid}")
    if col == agent.id:
        return agent.discover(row, now, f"dpid:{outcome.dpid}")
    return None


# out-of-band forwarding


def masquerade_base(agent: AgentState) -> MacAddr:
    return MacAddr.from_int(0x02_00_00_00_00_00 | (agent.id << 24))


def oob_send(
    agent: AgentState,
    payload: bytes,
    dst_mac: MacAddr,
    stealth: bool,
    chunk_size: int = DEFAULT_CHUNK,
    base_src: Optional[MacAddr] = None,
) -> List[Frame]:
    """
    Chunk ``payload`` into frames for ``dst_mac``.

    Each frame carries a 6-byte header (sequence number, total chunks) ahead
    of at most ``chunk_size`` payload bytes and a fresh masqueraded source so
    that every frame misses the sender's flow table.
    """
    if not payload:
        return []
    if chunk_size <= 0:
        raise Oversize(f"chunk size must be positive, got {chunk_size}")
    ethertype = ETH_JUMBO if stealth else ETH_IPV4
    limit = MAX_JUMBO_PAYLOAD if ethertype in JUMBO_ETHERTYPES else MAX_PAYLOAD
    if chunk_size + CHUNK_HEADER.size > limit:
        raise Oversize(f"chunk of {chunk_size} bytes plus header exceeds {limit}")
    chunks = [payload[k:k + chunk_size] for k in range(0, len(payload), chunk_size)]
    if len(chunks) > 0xFFFF:
        raise Oversize(f"{len(chunks)} chunks exceed the 16-bit chunk count")

    base = (base_src or masquerade_base(agent)).to_int()
    frames = []
    for seq, chunk in enumerate(chunks):
        src = MacAddr.from_int((base + agent.tx_counter) & 0xFFFF_FFFF_FFFF)
        agent.tx_counter += 1
        frames.append(Frame(
            src=src,
            dst=dst_mac,
            ethertype=ethertype,
            payload=CHUNK_HEADER.pack(seq, len(chunks)) + chunk,
            tag=f"oob-{agent.id}",
        ))
    return frames


def oob_receive(agent: AgentState, frame: Frame) -> Optional[bytes]:
    """Store one chunk; returns the whole payload once every chunk has arrived."""
    if len(frame.payload) < CHUNK_HEADER.size:
        return None
    seq, total = CHUNK_HEADER.unpack_from(frame.payload)
    if agent.rx_total is None:
        agent.rx_total = total
    agent.rx_chunks.setdefault(seq, frame.payload[CHUNK_HEADER.size:])
    # rx_buffer only grows by the contiguous prefix.
    while agent.rx_consumed in agent.rx_chunks:
        agent.rx_buffer += agent.rx_chunks[agent.rx_consumed]
        agent.rx_consumed += 1
    if agent.rx_consumed == agent.rx_total:
        return bytes(agent.rx_buffer)
    return None

