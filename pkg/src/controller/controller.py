"""
Reactive, intent-based controller.

One ``Cluster`` holds the shared store (admission table, host tracker,
intents and the registry of installed rules). Each ``Controller`` is a
frontend owning some switch connections; in distributed mode two frontends
share one cluster.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from ..protocol.messages import (
    DEFAULT_RECOGNIZED_ETHERTYPES,
    ControlMessage,
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
    MacAddr,
    MatchFields,
    Output,
    PacketIn,
    PacketOut,
    RoleReply,
)
from ..utils.durations import MS, SECOND
from ..utils.errors import InvalidDpid, UnknownSwitch
from ..utils.logger import get_logger
from .admission import AdmissionDecision, AdmissionPolicy, AdmissionTable, Outcome, admit_switch
from .topology import Topology, compute_path

logger = get_logger(__name__)


@dataclass(frozen=True)
class ControllerSettings:
    policy: AdmissionPolicy = AdmissionPolicy.DENY_SECOND
    recognized_ethertypes: FrozenSet[int] = DEFAULT_RECOGNIZED_ETHERTYPES
    paved_priority: int = 100
    paved_idle_timeout: Optional[int] = 10 * SECOND
    intent_delay: int = 3 * MS
    distributed: bool = False


@dataclass(frozen=True)
class Command:
    """A message for one switch connection, sent after ``delay`` ns."""
    conn_id: int
    msg: ControlMessage
    delay: int = 0


@dataclass(frozen=True)
class Note:
    text: str


Reaction = Union[Command, Note]


@dataclass
class HostLocation:
    dpid: int
    port: int
    learn_time: int

    @property
    def endpoint(self) -> Tuple[int, int]:
        return (self.dpid, self.port)


class IntentState(str, Enum):
    INSTALLED = "Installed"
    FAILED = "Failed"


@dataclass
class IntentRecord:
    endpoints: Tuple[MacAddr, MacAddr]
    state: IntentState
    paved_rules: List[Tuple[int, int]] = field(default_factory=list)
    installed_at: int = 0

    def peer_of(self, mac: MacAddr) -> MacAddr:
        a, b = self.endpoints
        return b if mac == a else a


def intent_key(a: MacAddr, b: MacAddr) -> Tuple[MacAddr, MacAddr]:
    return (a, b) if a <= b else (b, a)


@dataclass
class Cluster:
    """State shared by every frontend of one logical controller."""
    settings: ControllerSettings = field(default_factory=ControllerSettings)
    topology: Topology = field(default_factory=Topology)
    admission: AdmissionTable = field(default_factory=AdmissionTable)
    hosts: Dict[MacAddr, HostLocation] = field(default_factory=dict)
    intents: Dict[Tuple[MacAddr, MacAddr], IntentRecord] = field(default_factory=dict)
    rules: Dict[Tuple[int, int], FlowRule] = field(default_factory=dict)
    rule_owner: Dict[Tuple[int, int], Tuple[MacAddr, MacAddr]] = field(default_factory=dict)
    cookies: Dict[Tuple[int, int, MatchFields], int] = field(default_factory=dict)
    next_cookie: int = 1
    events: int = 0
    decisions: List[Tuple[int, int, AdmissionDecision]] = field(default_factory=list)

    def cookie_for(self, dpid: int, priority: int, match: MatchFields) -> int:
        key = (dpid, priority, match)
        if key not in self.cookies:
            self.cookies[key] = self.next_cookie
            self.next_cookie += 1
        return self.cookies[key]

    def intent(self, a: MacAddr, b: MacAddr) -> Optional[IntentRecord]:
        return self.intents.get(intent_key(a, b))


class Controller:
    """A controller frontend. ``handle`` is the single entry point per inbound message."""

    def __init__(self, name: str, cluster: Cluster):
        self.name = name
        self.cluster = cluster

    @property
    def settings(self) -> ControllerSettings:
        return self.cluster.settings

    def handle(self, conn_id: int, msg: ControlMessage, now: int) -> List[Reaction]:
        if isinstance(msg, Hello):
            return [Command(conn_id, Hello()), Command(conn_id, FeaturesRequest())]
        if isinstance(msg, FeaturesReply):
            return self._on_features(conn_id, msg.dpid, now)
        if isinstance(msg, RoleReply):
            return []
        if isinstance(msg, Disconnect):
            self.connection_closed(conn_id)
            return []

        dpid = self.cluster.admission.dpid_of(conn_id)
        try:
            if dpid is None:
                raise UnknownSwitch(f"{type(msg).__name__} on unadmitted connection {conn_id}")
            if isinstance(msg, PacketIn):
                return _dedupe(on_packet_in(self, dpid, msg, now))
            if isinstance(msg, FlowRemoved):
                return on_flow_removed(self, dpid, msg, now)
        except UnknownSwitch as e:
            logger.debug(f"{self.name}: {e}")
            return [Note(f"UnknownSwitch: {e}")]
        except Exception as e:
            # A malformed event must never take a switch down.
            logger.error(f"{self.name}: failed to handle {type(msg).__name__}: {e}", exc_info=True)
            return [Note(f"{self.name}: handler error on {type(msg).__name__}")]
        return [Note(f"{self.name}: unexpected {type(msg).__name__} ignored")]

    def connection_closed(self, conn_id: int) -> None:
        dpid = self.cluster.admission.release(conn_id)
        if dpid is not None and not self.cluster.admission.holders.get(dpid):
            self.cluster.topology.remove_switch(dpid)

    def _on_features(self, conn_id: int, claimed: int, now: int) -> List[Reaction]:
        try:
            decision, messages = admit_switch(
                self.cluster.admission, conn_id, self.name, claimed, self.settings.policy
            )
        except InvalidDpid as e:
            return [Note(f"InvalidDpid: {e}"), Command(conn_id, Disconnect("invalid-dpid"))]
        self.cluster.decisions.append((now, claimed, decision))
        if decision.outcome is not Outcome.DENY:
            self.cluster.topology.add_switch(claimed)
        logger.info(f"{self.name}: dpid {claimed} on conn {conn_id} -> {decision.outcome.value}")
        return [Command(cid, m) for cid, m in messages]


def _dedupe(reactions: List[Reaction]) -> List[Reaction]:
    """Keep the first FlowMod per (connection, op, priority, match) within one event."""
    seen = set()
    out: List[Reaction] = []
    for r in reactions:
        if isinstance(r, Command) and isinstance(r.msg, FlowMod):
            key = (r.conn_id, r.msg.op, r.msg.rule.priority, r.msg.rule.match)
            if key in seen:
                continue
            seen.add(key)
        out.append(r)
    return out


def _conn(ctrl: Controller, dpid: int) -> Optional[int]:
    return ctrl.cluster.admission.master_conn(dpid)


def _flow_mod(ctrl: Controller, dpid: int, op: FlowModOp, rule: FlowRule) -> List[Reaction]:
    conn_id = _conn(ctrl, dpid)
    if conn_id is None:
        return [Note(f"no master connection for dpid {dpid}")]
    return [Command(conn_id, FlowMod(op, rule), ctrl.settings.intent_delay)]


def _deliver(ctrl: Controller, frame: Frame) -> List[Reaction]:
    """One PacketOut at the destination's switch, straight out of its host port."""
    loc = ctrl.cluster.hosts.get(frame.dst)
    if loc is None:
        return [Note(f"destination {frame.dst} unknown, frame dropped")]
    conn_id = _conn(ctrl, loc.dpid)
    if conn_id is None:
        return [Note(f"no master connection for dpid {loc.dpid}")]
    return [Command(conn_id, PacketOut((Output(loc.port),), frame))]


def _path_rules(
    ctrl: Controller, a: MacAddr, b: MacAddr, path: List[int]
) -> List[Tuple[int, FlowRule]]:
    """Both direction rules for every switch on ``path`` (from a's switch to b's)."""
    cluster = ctrl.cluster
    s = ctrl.settings
    a_loc, b_loc = cluster.hosts[a], cluster.hosts[b]
    out = []
    for idx, dpid in enumerate(path):
        to_b = b_loc.port if idx == len(path) - 1 else cluster.topology.port_towards(dpid, path[idx + 1])
        to_a = a_loc.port if idx == 0 else cluster.topology.port_towards(dpid, path[idx - 1])
        for src, dst, port in ((a, b, to_b), (b, a, to_a)):
            match = MatchFields(dl_src=src, dl_dst=dst)
            rule = FlowRule(
                cookie=cluster.cookie_for(dpid, s.paved_priority, match),
                priority=s.paved_priority,
                match=match,
                actions=(Output(port),),
                idle_timeout=s.paved_idle_timeout,
            )
            out.append((dpid, rule))
    return out


def _register(ctrl: Controller, intent: IntentRecord, dpid: int, rule: FlowRule) -> None:
    key = (dpid, rule.cookie)
    ctrl.cluster.rules[key] = rule
    ctrl.cluster.rule_owner[key] = intent_key(*intent.endpoints)
    if key not in intent.paved_rules:
        intent.paved_rules.append(key)


def _pave(ctrl: Controller, src: MacAddr, dst: MacAddr, now: int) -> List[Reaction]:
    """Compile the (src, dst) intent: pave-path FlowMods, or Failed when no path exists."""
    cluster = ctrl.cluster
    path = compute_path(cluster.topology, cluster.hosts[src].endpoint, cluster.hosts[dst].endpoint)
    key = intent_key(src, dst)
    previous = cluster.intents.get(key)
    if path is None:
        cluster.intents[key] = IntentRecord(endpoints=(src, dst), state=IntentState.FAILED, installed_at=now)
        logger.debug(f"intent {src}<->{dst} failed: no data-plane path")
        return [Note(f"intent {src}<->{dst} Failed: no path")]

    if previous is not None and previous.state is IntentState.INSTALLED:
        intent = previous
        logger.debug(f"path reset for {src}<->{dst} along {path}")
    else:
        intent = IntentRecord(endpoints=(src, dst), state=IntentState.INSTALLED, installed_at=now)
        cluster.intents[key] = intent
    reactions: List[Reaction] = []
    for dpid, rule in _path_rules(ctrl, src, dst, path):
        _register(ctrl, intent, dpid, rule)
        reactions += _flow_mod(ctrl, dpid, FlowModOp.ADD, rule)
    return reactions


def on_packet_in(ctrl: Controller, dpid: int, pkt: PacketIn, now: int) -> List[Reaction]:
    """
    React to a PacketIn from an admitted switch.

    Learns the source location whatever the ethertype (a move runs a path
    update only for recognized traffic), then
    forwards: unrecognized ethertypes get a bare PacketOut, recognized
    unicast traffic gets its intent compiled plus a delivery PacketOut.
    """
    cluster = ctrl.cluster
    if dpid not in cluster.admission.holders:
        raise UnknownSwitch(f"dpid {dpid} is not admitted")
    cluster.events += 1
    frame = pkt.frame
    recognized = frame.ethertype in ctrl.settings.recognized_ethertypes
    reactions: List[Reaction] = []
    delivered = False

    edge_port = not cluster.topology.is_infrastructure(dpid, pkt.in_port)
    if edge_port and not frame.src.is_multicast:
        new_loc = HostLocation(dpid, pkt.in_port, now)
        old = cluster.hosts.get(frame.src)
        if old is None:
            cluster.hosts[frame.src] = new_loc
            logger.debug(f"learned {frame.src} at dpid {dpid} port {pkt.in_port}")
        elif old.endpoint == new_loc.endpoint:
            old.learn_time = now
        elif recognized:
            reactions += update_host_location(ctrl, frame.src, new_loc, now, frame)
            delivered = not frame.dst.is_multicast and frame.dst in cluster.hosts
        else:
            # a move seen only through an unrecognized frame stays put: no FlowMods
            logger.debug(f"{frame.src} seen at dpid {dpid} port {pkt.in_port}, move deferred")

    if frame.dst.is_multicast:
        return reactions

    if not recognized:
        return reactions + _deliver(ctrl, frame)

    if frame.dst not in cluster.hosts:
        return reactions + [Note(f"destination {frame.dst} unknown, frame dropped")]
    if frame.src.is_multicast or frame.src == frame.dst:
        return reactions if delivered else reactions + _deliver(ctrl, frame)

    reactions += _pave(ctrl, frame.src, frame.dst, now)
    if not delivered:
        reactions += _deliver(ctrl, frame)
    return reactions


def update_host_location(
    ctrl: Controller,
    mac: MacAddr,
    new_loc: HostLocation,
    now: int,
    frame: Optional[Frame] = None,
) -> List[Reaction]:
    """
    Move ``mac`` to ``new_loc``.

    Deletes the rules referencing ``mac`` on its old switch, installs its
    active peers' rules on the new switch and forwards the triggering frame.
    """
    cluster = ctrl.cluster
    old = cluster.hosts.get(mac)
    if old is not None and old.endpoint == new_loc.endpoint:
        old.learn_time = now
        return []
    reactions: List[Reaction] = []

    if old is not None:
        logger.debug(f"{mac} moved from dpid {old.dpid} port {old.port} to dpid {new_loc.dpid} port {new_loc.port}")
        stale = sorted(
            (key for key, rule in cluster.rules.items() if key[0] == old.dpid and rule.match.references(mac)),
        )
        for key in stale:
            rule = cluster.rules.pop(key)
            owner = cluster.rule_owner.pop(key, None)
            intent = cluster.intents.get(owner) if owner else None
            if intent is not None and key in intent.paved_rules:
                intent.paved_rules.remove(key)
            reactions += _flow_mod(ctrl, old.dpid, FlowModOp.DELETE_STRICT, rule)

    cluster.hosts[mac] = new_loc

    for key in sorted(k for k in cluster.intents if mac in k):
        intent = cluster.intents[key]
        if intent.state is not IntentState.INSTALLED:
            continue
        peer = intent.peer_of(mac)
        if peer not in cluster.hosts or peer == mac:
            continue
        path = compute_path(cluster.topology, new_loc.endpoint, cluster.hosts[peer].endpoint)
        if path is None:
            continue
        for dpid, rule in _path_rules(ctrl, mac, peer, path):
            if dpid != new_loc.dpid:
                continue
            _register(ctrl, intent, dpid, rule)
            reactions += _flow_mod(ctrl, dpid, FlowModOp.ADD, rule)

    if frame is not None and not frame.dst.is_multicast and frame.dst in cluster.hosts:
        reactions += _deliver(ctrl, frame)
    return reactions


def on_flow_removed(ctrl: Controller, dpid: int, msg: FlowRemoved, now: int) -> List[Reaction]:
    """Repair a deleted rule of an installed intent; an idle expiry withdraws the intent."""
    cluster = ctrl.cluster
    cluster.events += 1
    key = (dpid, msg.cookie)
    rule = cluster.rules.get(key)
    if rule is None:
        return []
    owner = cluster.rule_owner.get(key)
    intent = cluster.intents.get(owner) if owner else None

    if msg.reason is FlowRemovedReason.IDLE_TIMEOUT:
        cluster.rules.pop(key, None)
        cluster.rule_owner.pop(key, None)
        if intent is not None:
            cluster.intents.pop(owner, None)
            logger.debug(f"intent {intent.endpoints[0]}<->{intent.endpoints[1]} withdrawn after idle expiry")
        return []

    if intent is None or intent.state is not IntentState.INSTALLED:
        return []
    logger.debug(f"repairing cookie {msg.cookie} on dpid {dpid}")
    return _flow_mod(ctrl, dpid, FlowModOp.ADD, rule)
