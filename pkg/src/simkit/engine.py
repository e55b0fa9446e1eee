"""
Deterministic discrete-event engine.

Events execute in strict (t, seq) order. Every message or frame put on a
link is written to the trace at send time, with ``cause`` naming the record
whose arrival triggered it, and scheduled for arrival after the link's
latency.
"""

import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

from ..controller.controller import Cluster, Command, Controller, Note
from ..dataplane.effects import Delivered, Effect, EmitFrame, OpenConnection, SendControl, StartTimer, TraceNote
from ..dataplane.host import HOST_PORT, HostCapabilities, HostState, host_receive
from ..dataplane.middlebox import FirewallState, NidsState, Verdict, firewall_filter, nids_inspect
from ..dataplane.switch import (
    ConnectionState,
    ConnState,
    SwitchCapabilities,
    SwitchState,
    connect,
    expire_idle,
    local_delete,
    local_install,
    switch_handle_control,
    switch_ingress,
)
from ..protocol.messages import (
    FlowRule,
    Frame,
    MacAddr,
    MatchFields,
    PacketIn,
    PacketOut,
    message_kind,
    wire_bytes,
)
from ..protocol.trace import NO_CAUSE, TraceRecord, render_frame, render_message, render_note
from ..teleport.agents import (
    OobReceiver,
    OobSender,
    PathResetReceiver,
    PathResetSender,
    PathUpdateAgent,
    SwitchIdAgent,
)
from ..teleport.channels import AgentState, ResetMode, Technique
from ..teleport.secrets import SecretMatrix
from ..utils.config import config
from ..utils.durations import MS, format_ms
from ..utils.errors import CapabilityError, ConfigError, EventOverflow
from ..utils.logger import get_logger
from ..watcher.watcher import Watcher
from .apps import Announce, EchoResponder, FinScan, HttpClient, HttpServer, MitmRewriter, Ping, Stream
from .links import ControlChannel, Wire, control_bucket
from .metrics import Metrics
from .scenario import AgentSpec, Scenario, WorkloadSpec

logger = get_logger(__name__)

IDLE_SWEEP = 100 * MS
SWEEP_TIMER = "idle-sweep"
DEFAULT_BITS = 32


class EventKind(str, Enum):
    FRAME_ARRIVAL = "FrameArrival"
    CONTROL_ARRIVAL = "ControlArrival"
    TIMER = "Timer"
    OPERATOR_ACTION = "OperatorAction"


@dataclass(order=True, frozen=True)
class SimEvent:
    t: int
    seq: int
    target: str = field(compare=False)
    kind: EventKind = field(compare=False)
    payload: Any = field(default=None, compare=False)
    cause: int = field(default=NO_CAUSE, compare=False)


Trace = List[TraceRecord]


def masquerade_base(index: int) -> MacAddr:
    """Locally administered unicast range for workload item ``index``."""
    return MacAddr.from_int(0x06_00_00_00_00_00 | (index << 24))


class Simulation:
    """
    One scenario instance.

    Args:
        scenario: Validated scenario
        watcher: Optional watcher tapping every trace record online
        enforce: Withhold controller messages the watcher denies
        event_limit: Bound on pending events (defaults to the configured one)
    """

    def __init__(
        self,
        scenario: Scenario,
        watcher: Optional[Watcher] = None,
        enforce: bool = False,
        event_limit: Optional[int] = None,
    ):
        if enforce and watcher is None:
            raise ConfigError("enforcement needs a watcher")
        self.scenario = scenario
        self.watcher = watcher
        self.enforce = enforce
        self.event_limit = event_limit or config.event_limit
        self.now = 0
        self.records: Trace = []
        self.metrics = Metrics()
        self.rng = random.Random(scenario.seed)

        self.cluster = Cluster(settings=scenario.controller.settings())
        self.controllers: Dict[str, Controller] = {
            name: Controller(name, self.cluster) for name in scenario.controller.names
        }
        self.switches: Dict[str, SwitchState] = {}
        self.hosts: Dict[str, HostState] = {}
        self.firewalls: Dict[str, FirewallState] = {}
        self.nids: Dict[str, NidsState] = {}
        self.wires: Dict[Tuple[str, int], Wire] = {}
        self.channels: Dict[int, ControlChannel] = {}
        self.agents: Dict[str, List[Any]] = {}
        self.bits: Dict[str, List[int]] = {}

        self._home: Dict[str, str] = {}
        self._queue: List[SimEvent] = []
        self._event_seq = 0
        self._next_conn = 1
        self._teleported: Dict[int, Frame] = {}
        self._started = False
        self._build()

    # construction

    def _build(self) -> None:
        scn = self.scenario
        for spec in scn.switches:
            self.switches[spec.name] = SwitchState(
                name=spec.name,
                dpid=spec.dpid,
                capabilities=SwitchCapabilities(
                    inject_packet_in=spec.inject_packet_in,
                    ignore_rules=spec.ignore_rules,
                    claim_dpid=tuple(spec.claim_dpid or ()),
                    local_rewrite_rules=spec.local_rewrite_rules,
                ),
            )
            self._home[spec.name] = spec.controller or scn.controller.names[0]
            self.cluster.topology.graph.add_node(spec.dpid)

        for spec in scn.hosts:
            self.hosts[spec.name] = HostState(
                name=spec.name,
                mac=MacAddr.parse(spec.mac),
                attached=(spec.switch, spec.port),
                capabilities=HostCapabilities(spec.masquerade_macs, spec.arbitrary_ethertype),
            )
            self._wire(spec.name, HOST_PORT, spec.switch, spec.port, MS)

        for spec in scn.firewalls:
            self.firewalls[spec.name] = FirewallState(spec.name, spec.firewall_rules(), spec.default)
        for spec in scn.nids:
            self.nids[spec.name] = NidsState(spec.name)

        for link in scn.links:
            self._wire(link.a, link.a_port, link.b, link.b_port, link.latency)
        self._build_topology()

        for spec in scn.rules:
            sw = self.switches[spec.switch]
            rule = FlowRule(
                cookie=spec.cookie,
                priority=spec.priority,
                match=spec.match(),
                actions=spec.action_list(),
                idle_timeout=spec.idle_timeout,
            )
            try:
                local_install(sw, rule, 0)
            except CapabilityError as e:
                raise ConfigError(str(e)) from e

        for spec in scn.agents:
            self.agents.setdefault(spec.node, []).append(self._build_agent(spec))
        for index, item in enumerate(scn.workload):
            self._build_workload(index, item)

    def _wire(self, a: str, a_port: int, b: str, b_port: int, latency: int) -> None:
        for node, port in ((a, a_port), (b, b_port)):
            if (node, port) in self.wires:
                raise ConfigError(f"port {node}:{port} is wired twice")
        self.wires[(a, a_port)] = Wire(b, b_port, latency)
        self.wires[(b, b_port)] = Wire(a, a_port, latency)
        for node, port, peer in ((a, a_port, b), (b, b_port, a)):
            if node in self.switches:
                self.switches[node].ports[port] = peer

    def _build_topology(self) -> None:
        """Switch adjacency as the controller discovers it; middleboxes are transparent."""
        topo = self.cluster.topology
        for (node, port), wire in sorted(self.wires.items()):
            if node in self.switches and wire.peer in self.switches and node < wire.peer:
                topo.add_link(self.switches[node].dpid, port, self.switches[wire.peer].dpid, wire.peer_port)
        for box in sorted(set(self.firewalls) | set(self.nids)):
            ends = [self.wires.get((box, port)) for port in (1, 2)]
            if all(w is not None and w.peer in self.switches for w in ends):
                a, b = ends
                topo.add_link(self.switches[a.peer].dpid, a.peer_port, self.switches[b.peer].dpid, b.peer_port)

    def _local_port(self, switch: str) -> Optional[int]:
        ports = sorted(p for p, peer in self.switches[switch].ports.items() if peer in self.hosts)
        return ports[0] if ports else None

    def _bits(self, spec: AgentSpec) -> List[int]:
        if spec.bits:
            return [int(b) for b in spec.bits]
        return [self.rng.getrandbits(1) for _ in range(DEFAULT_BITS)]

    def _build_agent(self, spec: AgentSpec):
        matrix = SecretMatrix(spec.m, spec.salt)
        technique = Technique(spec.technique)
        state = AgentState(id=spec.id, technique=technique, matrix=matrix, slot=spec.slot)
        if spec.flow_src and spec.flow_dst:
            state.flow = (MacAddr.parse(spec.flow_src), MacAddr.parse(spec.flow_dst))

        if technique is Technique.OOB_FORWARD:
            host = self.hosts.get(spec.node)
            if host is None:
                raise ConfigError(f"out-of-band agent must sit on a host, not {spec.node}")
            if spec.role == "receiver":
                app = OobReceiver(state)
            else:
                payload = spec.payload() or self.rng.randbytes(spec.payload_size)
                if spec.dst is None:
                    raise ConfigError(f"out-of-band sender on {spec.node} has no dst")
                app = OobSender(
                    state,
                    payload,
                    MacAddr.parse(spec.dst),
                    spec.stealth,
                    spec.start,
                    interval=spec.interval,
                    chunk_size=spec.chunk,
                )
            host.apps.append(app)
            return app

        sw = self.switches.get(spec.node)
        if sw is None:
            raise ConfigError(f"{technique.value} agent must sit on a switch, not {spec.node}")
        state.local_port = spec.local_port or self._local_port(spec.node)
        if technique is Technique.PATH_UPDATE:
            agent = PathUpdateAgent(state, spec.start)
        elif technique is Technique.PATH_RESET:
            state.mode = ResetMode(spec.mode)
            if spec.role == "receiver":
                agent = PathResetReceiver(state, spec.start)
            else:
                bits = self._bits(spec)
                self.bits[spec.node] = bits
                agent = PathResetSender(state, bits, spec.start)
        else:
            agent = SwitchIdAgent(state, spec.start, spec.spacing, spec.claims, spec.controller)
        sw.agent = agent
        return agent

    def _build_workload(self, index: int, item: WorkloadSpec) -> None:
        if item.kind == "del_flow":
            match = MatchFields(
                dl_src=MacAddr.parse(item.match_src) if item.match_src else None,
                dl_dst=MacAddr.parse(item.match_dst) if item.match_dst else None,
            )
            priority = self.scenario.controller.paved_priority if item.priority is None else item.priority
            self._schedule(item.start, item.src, EventKind.OPERATOR_ACTION, (priority, match))
            return

        host = self.hosts.get(item.src)
        if host is None:
            raise ConfigError(f"workload {item.kind} must start on a host, not {item.src}")
        dst = self.hosts[item.dst] if item.dst else None
        if item.kind != "announce" and dst is None:
            raise ConfigError(f"workload {item.kind} on {item.src} needs a dst")
        name = item.tag or f"{item.kind}-{index}"
        base = masquerade_base(index + 1)

        if item.kind == "announce":
            host.apps.append(Announce(name, item.start))
        elif item.kind in ("ping", "probe"):
            host.apps.append(Ping(
                name, dst.mac, item.start, item.interval, item.count, item.payload_size,
                masquerade=item.masquerade, base_src=base,
            ))
            if item.kind == "ping" and not any(isinstance(a, EchoResponder) for a in dst.apps):
                dst.apps.append(EchoResponder())
        elif item.kind == "http":
            dst.apps.append(HttpServer(item.body.encode("utf-8")))
            host.apps.append(HttpClient(name, dst.mac, item.start))
        elif item.kind == "finscan":
            ports = item.ports or list(range(20, 30))
            host.apps.append(FinScan(name, dst.mac, ports, item.start, item.interval, item.masquerade, base))
        elif item.kind == "stream":
            rate = item.rate_pps or 1_000_000_000 / item.interval
            count = int(item.duration * rate / 1_000_000_000) if item.duration else item.count
            host.apps.append(Stream(
                name, dst.mac, item.start, rate, count, item.payload_size, item.ethertype,
                item.masquerade, base, item.identical, seed=self.scenario.seed + index,
            ))
        elif item.kind == "mitm":
            host.apps.append(MitmRewriter(dst.mac, item.find.encode("utf-8"), item.replace.encode("utf-8")))

    # scheduling and records

    def _schedule(self, t: int, target: str, kind: EventKind, payload: Any = None, cause: int = NO_CAUSE) -> None:
        heapq.heappush(self._queue, SimEvent(t, self._event_seq, target, kind, payload, cause))
        self._event_seq += 1
        if len(self._queue) > self.event_limit:
            raise EventOverflow(f"{len(self._queue)} pending events at t={format_ms(self.now)} ms")

    def _record(self, src: str, dst: str, kind: str, render: Callable[[int], str], wire: int) -> int:
        seq = len(self.records)
        rec = TraceRecord(t=self.now, src=src, dst=dst, kind=kind, msg=render(seq), wire_bytes=wire)
        self.records.append(rec)
        if self.watcher is not None:
            for alert in self.watcher.observe(rec):
                self.metrics.alerts[alert.kind.value] += 1
        return seq

    def _note(self, src: str, text: str, cause: int) -> int:
        logger.debug(f"note {src}: {text}")
        return self._record(src, "-", "note", lambda seq: render_note(text, seq, cause), 0)

    def _open(self, sw: SwitchState, dpid: int, controller: str, primary: bool) -> List[Effect]:
        conn_id = self._next_conn
        self._next_conn += 1
        self.channels[conn_id] = ControlChannel(
            conn_id=conn_id,
            switch=sw.name,
            controller=controller,
            latency=self.scenario.control_latency,
            bucket=control_bucket(self.scenario.capacity_bps),
        )
        return connect(sw, ConnectionState(conn_id=conn_id, controller=controller, dpid=dpid), primary)

    # effects

    def _apply(self, node: str, effects: List[Effect], cause: int) -> None:
        for effect in effects:
            if isinstance(effect, EmitFrame):
                self._emit(node, effect.port, effect.frame, cause)
            elif isinstance(effect, SendControl):
                self._switch_send(self.switches[node], effect, cause)
            elif isinstance(effect, TraceNote):
                self._note(node, effect.text, cause)
            elif isinstance(effect, StartTimer):
                self._schedule(self.now + effect.delay, node, EventKind.TIMER, (effect.name, effect.data), cause)
            elif isinstance(effect, OpenConnection):
                sw = self.switches[node]
                if not sw.capabilities.may_claim(sw.dpid, effect.dpid):
                    self._note(node, f"may not claim dpid {effect.dpid}, connection not opened", cause)
                    continue
                controller = effect.controller or self._home[node]
                self._apply(node, self._open(sw, effect.dpid, controller, primary=False), cause)
            elif isinstance(effect, Delivered):
                self._delivered(effect.frame)

    def _emit(self, node: str, port: int, frame: Frame, cause: int) -> None:
        wire = self.wires.get((node, port))
        if wire is None:
            self._note(node, f"port {port} is not wired, frame dropped", cause)
            return
        seq = self._record(
            node,
            wire.peer,
            "data",
            lambda s: render_frame(frame, s, cause, out_port=port, in_port=wire.peer_port),
            frame.wire_size,
        )
        self.metrics.link(node, wire.peer).add(frame.wire_size)
        if node in self.switches and wire.peer not in self.hosts:
            self.metrics.interswitch_frames += 1
        if node in self.hosts and frame.tag:
            self.metrics.flow(frame.tag).record_offer(self.now)
        self._schedule(self.now + wire.latency, wire.peer, EventKind.FRAME_ARRIVAL, (wire.peer_port, frame), seq)

    def _delivered(self, frame: Frame) -> None:
        teleported = self._teleported.pop(id(frame), None) is not None
        if not frame.tag or frame.tag not in self.metrics.flows:
            return
        self.metrics.flows[frame.tag].record_delivery(frame, self.now, teleported)
        if teleported and frame.tag in self.metrics.channels:
            self.metrics.channels[frame.tag].record_delivery(len(frame.payload))

    def _switch_send(self, sw: SwitchState, effect: SendControl, cause: int) -> None:
        conn_id = sw.primary_conn if effect.conn_id is None else effect.conn_id
        channel = self.channels.get(conn_id)
        if channel is None:
            self._note(sw.name, "no controller connection, message dropped", cause)
            return
        msg = effect.msg
        size = wire_bytes(msg)
        seq = self._record(sw.name, channel.controller, "control", lambda s: render_message(msg, s, cause), size)
        self.metrics.control_messages[message_kind(msg)] += 1
        self.metrics.control_bytes_in += size
        if isinstance(msg, PacketIn) and msg.frame.tag and not msg.frame.dst.is_multicast:
            self.metrics.channel(msg.frame.tag).record_packet_in(len(msg.frame.payload))
        if channel.bucket is not None and not channel.bucket.consume(size, self.now):
            self.metrics.control_drops += 1
            self._note(sw.name, f"control channel saturated, {message_kind(msg)} lost", seq)
            return
        self._schedule(self.now + channel.latency, channel.controller, EventKind.CONTROL_ARRIVAL, (conn_id, msg), seq)

    def _controller_send(self, ctrl: str, cmd: Command, cause: int) -> None:
        channel = self.channels.get(cmd.conn_id)
        if channel is None:
            self._note(ctrl, f"unknown connection {cmd.conn_id}", cause)
            return
        msg = cmd.msg
        size = wire_bytes(msg)
        seq = self._record(ctrl, channel.switch, "control", lambda s: render_message(msg, s, cause), size)
        kind = message_kind(msg)
        self.metrics.control_messages[kind] += 1
        self.metrics.control_bytes_out += size
        if isinstance(msg, PacketOut) and msg.frame.tag:
            self.metrics.channel(msg.frame.tag).record_packet_out(len(msg.frame.payload))
        if self.enforce and (seq in self.watcher.blocked or cause in self.watcher.blocked):
            self.metrics.withheld += 1
            self._note(ctrl, f"{kind} withheld by waypoint enforcement", seq)
            return
        self._schedule(self.now + channel.latency, channel.switch, EventKind.CONTROL_ARRIVAL, (cmd.conn_id, msg), seq)

    def _react(self, ctrl: str, reactions, cause: int) -> None:
        for reaction in reactions:
            if isinstance(reaction, Note):
                self._note(ctrl, reaction.text, cause)
            elif reaction.delay > 0:
                self._schedule(self.now + reaction.delay, ctrl, EventKind.TIMER, reaction, cause)
            else:
                self._controller_send(ctrl, reaction, cause)

    # dispatch

    def _dispatch(self, ev: SimEvent) -> None:
        if ev.kind is EventKind.FRAME_ARRIVAL:
            self._on_frame(ev)
        elif ev.kind is EventKind.CONTROL_ARRIVAL:
            self._on_control(ev)
        elif ev.kind is EventKind.TIMER:
            self._on_timer(ev)
        else:
            priority, match = ev.payload
            self._apply(ev.target, local_delete(self.switches[ev.target], priority, match), ev.cause)

    def _on_frame(self, ev: SimEvent) -> None:
        port, frame = ev.payload
        node = ev.target
        if node in self.switches:
            self._apply(node, switch_ingress(self.switches[node], port, frame, self.now), ev.cause)
        elif node in self.hosts:
            self._apply(node, host_receive(self.hosts[node], frame, self.now), ev.cause)
        elif node in self.firewalls:
            fw = self.firewalls[node]
            if firewall_filter(fw, frame) is Verdict.ACCEPT:
                self._emit(node, 3 - port, frame, ev.cause)
            else:
                self._note(node, f"dropped {frame.src}->{frame.dst}", ev.cause)
        elif node in self.nids:
            if nids_inspect(self.nids[node], frame, self.now):
                self._note(node, f"alert: FIN scan {frame.src}->{frame.dst}:{frame.tp_dst}", ev.cause)
            self._emit(node, 3 - port, frame, ev.cause)

    def _on_control(self, ev: SimEvent) -> None:
        conn_id, msg = ev.payload
        if ev.target in self.controllers:
            self._react(ev.target, self.controllers[ev.target].handle(conn_id, msg, self.now), ev.cause)
            return
        sw = self.switches[ev.target]
        effects = switch_handle_control(sw, msg, self.now, conn_id)
        if isinstance(msg, PacketOut):
            for effect in effects:
                if isinstance(effect, EmitFrame):
                    self._teleported[id(effect.frame)] = effect.frame
        self._apply(sw.name, effects, ev.cause)

    def _on_timer(self, ev: SimEvent) -> None:
        node = ev.target
        if node in self.controllers:
            self._controller_send(node, ev.payload, ev.cause)
            return
        name, data = ev.payload
        if node in self.switches:
            sw = self.switches[node]
            if name == SWEEP_TIMER:
                self._sweep(sw, ev.cause)
            elif sw.agent is not None:
                self._apply(node, sw.agent.on_timer(sw, name, data, self.now), ev.cause)
        elif node in self.hosts:
            host = self.hosts[node]
            for app in host.apps:
                self._apply(node, app.on_timer(host, name, data, self.now), ev.cause)

    def _sweep(self, sw: SwitchState, cause: int) -> None:
        removed = expire_idle(sw, self.now)
        if sw.controller_conn is ConnState.CONNECTED:
            self._apply(sw.name, [SendControl(msg, sw.primary_conn) for msg in removed], cause)
        self._schedule(self.now + IDLE_SWEEP, sw.name, EventKind.TIMER, (SWEEP_TIMER, None))

    # running

    def _start(self) -> None:
        self._started = True
        for name, sw in self.switches.items():
            self._apply(name, self._open(sw, sw.dpid, self._home[name], primary=True), NO_CAUSE)
        for name, sw in self.switches.items():
            if sw.agent is not None:
                self._apply(name, sw.agent.on_start(sw, self.now), NO_CAUSE)
            self._schedule(IDLE_SWEEP, name, EventKind.TIMER, (SWEEP_TIMER, None))
        for name, host in self.hosts.items():
            for app in host.apps:
                self._apply(name, app.on_start(host, self.now), NO_CAUSE)

    def run(self, until: Optional[int] = None) -> Tuple[Trace, Metrics]:
        """
        Advance the simulation to ``until`` (defaults to the scenario duration).

        Returns:
            The trace records so far and the run metrics
        """
        until = self.scenario.duration if until is None else until
        if until <= 0:
            raise ConfigError(f"run length must be positive, got {until}")
        if not self._started:
            logger.info(f"running {self.scenario.name} for {format_ms(until)} ms (seed {self.scenario.seed})")
            self._start()
        while self._queue and self._queue[0].t <= until:
            ev = heapq.heappop(self._queue)
            self.now = ev.t
            self._dispatch(ev)
        self.now = max(self.now, until)
        if self.watcher is not None:
            for alert in self.watcher.finish():
                self.metrics.alerts[alert.kind.value] += 1
        self._collect(until)
        logger.info(f"{self.scenario.name} finished: {len(self.records)} records")
        return self.records, self.metrics

    def _collect(self, until: int) -> None:
        for name, fw in self.firewalls.items():
            self.metrics.firewalls[name] = {"accepted": fw.accepted, "dropped": fw.dropped}
        for name, nids in self.nids.items():
            self.metrics.nids_alerts[name] = len(nids.alerts)
        self.metrics.finish(until)

    # inspection helpers

    def host(self, name: str) -> HostState:
        return self.hosts[name]

    def switch(self, name: str) -> SwitchState:
        return self.switches[name]

    def agent(self, node: str, index: int = 0):
        return self.agents[node][index]


def run(
    scn: Scenario,
    until: Optional[int] = None,
    watcher: Optional[Watcher] = None,
    enforce: bool = False,
) -> Tuple[Trace, Metrics]:
    """Build and run ``scn`` once."""
    return Simulation(scn, watcher=watcher, enforce=enforce).run(until)
