"""
OpenFlow switch state machine.

Malicious behaviour is expressed through capability flags and an attached
``SwitchAgent``; the benign logic below never branches on who the agent is.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from ..protocol.flowtable import apply_actions, match_rule
from ..protocol.messages import (
    Disconnect,
    FeaturesReply,
    FeaturesRequest,
    FlowMod,
    FlowModOp,
    FlowRemoved,
    FlowRemovedReason,
    FlowRule,
    Frame,
    Hello,
    MatchFields,
    PacketIn,
    PacketInReason,
    PacketOut,
    Resubmit,
    Role,
    RoleReply,
    RoleRequest,
    SetDlDst,
)
from ..utils.errors import CapabilityError, ResubmitLoop, UnknownRule
from ..utils.logger import get_logger
from .effects import Effect, EmitFrame, SendControl, TraceNote

logger = get_logger(__name__)


class ConnState(str, Enum):
    DISCONNECTED = "Disconnected"
    CONNECTING = "Connecting"
    CONNECTED = "Connected"


@dataclass
class ConnectionState:
    conn_id: int
    controller: str
    dpid: int
    state: ConnState = ConnState.DISCONNECTED
    role: Optional[Role] = None
    was_master: bool = False


@dataclass(frozen=True)
class SwitchCapabilities:
    """What a malicious switch is able to do beyond OpenFlow semantics."""
    inject_packet_in: bool = False
    ignore_rules: bool = False
    claim_dpid: Tuple[int, ...] = ()
    local_rewrite_rules: bool = False

    @property
    def malicious(self) -> bool:
        return bool(self.inject_packet_in or self.ignore_rules or self.claim_dpid or self.local_rewrite_rules)

    def may_claim(self, own_dpid: int, dpid: int) -> bool:
        return dpid == own_dpid or dpid in self.claim_dpid


class SwitchAgent:
    """Hook points for a malicious agent. The base class behaves benignly."""

    def on_start(self, sw: "SwitchState", now: int) -> List[Effect]:
        return []

    def on_control(self, sw: "SwitchState", msg, conn_id: int, now: int) -> List[Effect]:
        return []

    def on_ingress(self, sw: "SwitchState", port: int, frame: Frame, now: int) -> None:
        """Observe a frame entering the switch, before lookup."""

    def on_flow_add(self, sw: "SwitchState", rule: FlowRule, redundant: bool, now: int) -> List[Effect]:
        """``redundant`` is True when an identical unexpired rule was already installed."""
        return []

    def punt(self, sw: "SwitchState", port: int, frame: Frame, rule: FlowRule, now: int) -> bool:
        """Return True to report a frame that hit ``rule`` as a table miss."""
        return False

    def on_timer(self, sw: "SwitchState", name: str, data, now: int) -> List[Effect]:
        return []


@dataclass
class SwitchState:
    name: str
    dpid: int
    ports: Dict[int, str] = field(default_factory=dict)
    table: List[FlowRule] = field(default_factory=list)
    connections: Dict[int, ConnectionState] = field(default_factory=dict)
    primary_conn: Optional[int] = None
    capabilities: SwitchCapabilities = field(default_factory=SwitchCapabilities)
    agent: Optional[SwitchAgent] = None
    port_tx_frames: Dict[int, int] = field(default_factory=dict)
    port_tx_bytes: Dict[int, int] = field(default_factory=dict)

    @property
    def controller_conn(self) -> ConnState:
        if self.primary_conn is None:
            return ConnState.DISCONNECTED
        return self.connections[self.primary_conn].state

    @property
    def role(self) -> Optional[Role]:
        if self.primary_conn is None:
            return None
        return self.connections[self.primary_conn].role

    def find_rule(self, priority: int, match: MatchFields) -> Optional[FlowRule]:
        for rule in self.table:
            if rule.priority == priority and rule.match == match:
                return rule
        return None


def connect(sw: SwitchState, conn: ConnectionState, primary: bool = False) -> List[Effect]:
    """Register a connection and start its handshake with a Hello."""
    sw.connections[conn.conn_id] = conn
    if primary or sw.primary_conn is None:
        sw.primary_conn = conn.conn_id
    conn.state = ConnState.CONNECTING
    return [SendControl(Hello(), conn.conn_id)]


def _emit(sw: SwitchState, port: int, frame: Frame) -> List[Effect]:
    if port not in sw.ports:
        return [TraceNote(f"{sw.name}: output to unknown port {port} dropped")]
    return [EmitFrame(port, frame)]


def _commit(sw: SwitchState, effects: List[Effect]) -> List[Effect]:
    """Count the frames a finished pipeline pass actually emits."""
    for effect in effects:
        if isinstance(effect, EmitFrame):
            sw.port_tx_frames[effect.port] = sw.port_tx_frames.get(effect.port, 0) + 1
            sw.port_tx_bytes[effect.port] = sw.port_tx_bytes.get(effect.port, 0) + effect.frame.wire_size
    return effects


def _packet_in(sw: SwitchState, port: int, frame: Frame, reason: PacketInReason) -> List[Effect]:
    if sw.controller_conn is not ConnState.CONNECTED:
        return [TraceNote(f"{sw.name}: no controller connection, frame dropped")]
    return [SendControl(PacketIn(in_port=port, frame=frame, reason=reason), sw.primary_conn)]


def _run_pipeline(sw: SwitchState, port: int, frame: Frame, now: int, allow_punt: bool) -> List[Effect]:
    effects: List[Effect] = []
    rule = match_rule(frame, port, sw.table)
    if rule is None:
        return _packet_in(sw, port, frame, PacketInReason.TABLE_MISS)
    rule.hit(frame, now)
    if (
        allow_punt
        and sw.capabilities.ignore_rules
        and sw.agent is not None
        and sw.agent.punt(sw, port, frame, rule, now)
    ):
        return _packet_in(sw, port, frame, PacketInReason.TABLE_MISS)

    result = apply_actions(frame, rule.actions)
    for out_port, out_frame in result.outputs:
        effects += _emit(sw, out_port, out_frame)
    if result.to_controller:
        effects += _packet_in(sw, port, result.frame, PacketInReason.ACTION)
    if result.resubmit:
        second = match_rule(result.frame, port, sw.table)
        if second is None:
            effects += _packet_in(sw, port, result.frame, PacketInReason.TABLE_MISS)
            return effects
        second.hit(result.frame, now)
        again = apply_actions(result.frame, second.actions, resubmitted=True)
        for out_port, out_frame in again.outputs:
            effects += _emit(sw, out_port, out_frame)
        if again.to_controller:
            effects += _packet_in(sw, port, again.frame, PacketInReason.ACTION)
    return effects


def switch_ingress(sw: SwitchState, port: int, frame: Frame, now: int) -> List[Effect]:
    """
    Process a frame arriving on ``port``.

    Table hits update counters and apply actions (one resubmit pass);
    misses go to the controller as PacketIn carrying the full frame.
    """
    if port not in sw.ports:
        raise KeyError(f"{sw.name} has no port {port}")
    if sw.agent is not None:
        sw.agent.on_ingress(sw, port, frame, now)
    try:
        return _commit(sw, _run_pipeline(sw, port, frame, now, allow_punt=True))
    except ResubmitLoop as e:
        logger.debug(f"{sw.name}: {e}")
        return [TraceNote(f"{sw.name}: resubmit loop, frame dropped")]


def install_rule(sw: SwitchState, rule: FlowRule, now: int) -> FlowRule:
    """Add a rule, replacing one with identical (priority, match)."""
    entry = rule.installed_copy(now)
    existing = sw.find_rule(rule.priority, rule.match)
    if existing is not None:
        sw.table[sw.table.index(existing)] = entry
    else:
        sw.table.append(entry)
    return entry


def local_install(sw: SwitchState, rule: FlowRule, now: int) -> FlowRule:
    """Operator-side install (``ovs-ofctl add-flow``); rewriting rules need local_rewrite_rules."""
    rewrites = any(isinstance(a, (SetDlDst, Resubmit)) for a in rule.actions)
    if rewrites and not sw.capabilities.local_rewrite_rules:
        raise CapabilityError(f"{sw.name} may not install local rewrite rule cookie {rule.cookie:#x}")
    return install_rule(sw, rule, now)


def delete_rule(sw: SwitchState, priority: int, match: MatchFields) -> FlowRule:
    rule = sw.find_rule(priority, match)
    if rule is None:
        raise UnknownRule(f"{sw.name}: no rule with priority {priority} and {match}")
    sw.table.remove(rule)
    return rule


def local_delete(sw: SwitchState, priority: int, match: MatchFields) -> List[Effect]:
    """Operator-side removal (``ovs-ofctl del-flows``); reported as FlowRemoved."""
    try:
        rule = delete_rule(sw, priority, match)
    except UnknownRule as e:
        return [TraceNote(str(e))]
    if sw.controller_conn is not ConnState.CONNECTED:
        return []
    removed = FlowRemoved(cookie=rule.cookie, match=rule.match, reason=FlowRemovedReason.DELETE, priority=rule.priority)
    return [SendControl(removed, sw.primary_conn)]


def switch_handle_control(sw: SwitchState, msg, now: int, conn_id: Optional[int] = None) -> List[Effect]:
    """Apply a controller message to the switch and return the reactions."""
    conn_id = sw.primary_conn if conn_id is None else conn_id
    conn = sw.connections.get(conn_id)
    if conn is None or conn.state is ConnState.DISCONNECTED:
        return [TraceNote(f"{sw.name}: message on closed connection ignored")]

    effects: List[Effect] = []
    if isinstance(msg, Hello):
        pass
    elif isinstance(msg, FeaturesRequest):
        effects.append(SendControl(FeaturesReply(dpid=conn.dpid), conn_id))
    elif isinstance(msg, RoleRequest):
        conn.state = ConnState.CONNECTED
        conn.role = msg.role
        conn.was_master = conn.was_master or msg.role is Role.MASTER
        effects.append(SendControl(RoleReply(role=msg.role), conn_id))
    elif isinstance(msg, Disconnect):
        conn.state = ConnState.DISCONNECTED
        conn.role = None
        logger.info(f"{sw.name}: connection {conn_id} (dpid {conn.dpid}) closed: {msg.reason}")
    elif conn.state is not ConnState.CONNECTED:
        effects.append(TraceNote(f"{sw.name}: {type(msg).__name__} before role assignment ignored"))
    elif isinstance(msg, FlowMod):
        if msg.op is FlowModOp.ADD:
            prior = sw.find_rule(msg.rule.priority, msg.rule.match)
            redundant = prior is not None and not _expired(prior, now)
            entry = install_rule(sw, msg.rule, now)
            if sw.agent is not None:
                effects += sw.agent.on_flow_add(sw, entry, redundant, now)
        else:
            try:
                delete_rule(sw, msg.rule.priority, msg.rule.match)
            except UnknownRule as e:
                effects.append(TraceNote(str(e)))
    elif isinstance(msg, PacketOut):
        try:
            effects += _commit(sw, _packet_out(sw, msg, now))
        except ResubmitLoop:
            effects.append(TraceNote(f"{sw.name}: resubmit loop in PacketOut, frame dropped"))

    if sw.agent is not None:
        effects += sw.agent.on_control(sw, msg, conn_id, now)
    return effects


def _packet_out(sw: SwitchState, msg: PacketOut, now: int) -> List[Effect]:
    effects: List[Effect] = []
    result = apply_actions(msg.frame, msg.actions)
    for out_port, out_frame in result.outputs:
        effects += _emit(sw, out_port, out_frame)
    if result.resubmit:
        # OFPP_TABLE: the carried frame takes one pass through the table.
        rule = match_rule(result.frame, None, sw.table)
        if rule is not None:
            rule.hit(result.frame, now)
            again = apply_actions(result.frame, [a for a in rule.actions if not isinstance(a, Resubmit)])
            for out_port, out_frame in again.outputs:
                effects += _emit(sw, out_port, out_frame)
    return effects


def _expired(rule: FlowRule, now: int) -> bool:
    return rule.idle_timeout is not None and now - rule.last_hit >= rule.idle_timeout


def expire_idle(sw: SwitchState, now: int) -> List[FlowRemoved]:
    """Remove rules idle for at least their timeout, reporting them by ascending cookie."""
    expired = [rule for rule in sw.table if _expired(rule, now)]
    for rule in expired:
        sw.table.remove(rule)
    expired.sort(key=lambda r: r.cookie)
    return [
        FlowRemoved(cookie=r.cookie, match=r.match, reason=FlowRemovedReason.IDLE_TIMEOUT, priority=r.priority)
        for r in expired
    ]
