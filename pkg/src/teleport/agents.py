"""Adapters attaching teleportation agents to simulated switches and hosts."""

from dataclasses import replace
from typing import List, Optional, Sequence, Set, Tuple

from ..dataplane.effects import Effect, OpenConnection, SendControl, StartTimer, TraceNote
from ..dataplane.host import HostApp, HostState, host_send
from ..dataplane.switch import ConnState, SwitchAgent, SwitchState, local_delete
from ..protocol.messages import (
    Disconnect,
    FlowMod,
    FlowModOp,
    FlowRule,
    Frame,
    MacAddr,
    PacketIn,
    RoleRequest,
)
from ..utils.durations import MS
from ..utils.errors import NoSharedPath, NotReady
from ..utils.logger import get_logger
from .channels import (
    DEFAULT_CHUNK,
    AgentState,
    Denied,
    PathResetAction,
    Replaced,
    RoleAssigned,
    SiOutcome,
    SlotEvent,
    oob_receive,
    oob_send,
    pr_decode_slot,
    pr_send_bit,
    pu_on_flow_delete,
    pu_start,
    shared_rule,
    si_claims,
    si_rendezvous_step,
)

logger = get_logger(__name__)


def _inject(sw: SwitchState, port: int, frames: Sequence[Frame]) -> List[Effect]:
    """Fabricated PacketIns; only switches able to inject may send them."""
    if not sw.capabilities.inject_packet_in:
        return [TraceNote(f"{sw.name}: cannot inject PacketIn")]
    if sw.controller_conn is not ConnState.CONNECTED:
        return [TraceNote(f"{sw.name}: announcement held, no controller connection")]
    return [SendControl(PacketIn(in_port=port, frame=f), sw.primary_conn) for f in frames]


class PathUpdateAgent(SwitchAgent):
    """Rendezvous by making the controller move secret MACs between switches."""

    def __init__(self, state: AgentState, start_at: int, retry: int = 10 * MS):
        self.state = state
        self.start_at = start_at
        self.retry = retry
        self.started: Optional[int] = None
        self._handled: Set[Tuple[MacAddr, int]] = set()

    def on_start(self, sw: SwitchState, now: int) -> List[Effect]:
        return [StartTimer(max(self.start_at - now, 0), "pu-start")]

    def on_ingress(self, sw: SwitchState, port: int, frame: Frame, now: int) -> None:
        st = self.state
        if (
            st.local_host is None
            and port == st.local_port
            and not frame.src.is_multicast
            and sw.controller_conn is ConnState.CONNECTED
        ):
            st.local_host = frame.src

    def on_timer(self, sw: SwitchState, name: str, data, now: int) -> List[Effect]:
        if name != "pu-start":
            return []
        try:
            frames = pu_start(self.state)
        except NotReady as e:
            logger.debug(f"{sw.name}: {e}, retrying")
            return [StartTimer(self.retry, "pu-start")]
        self.started = now
        return _inject(sw, self.state.local_port, frames)

    def on_control(self, sw: SwitchState, msg, conn_id: int, now: int) -> List[Effect]:
        if not isinstance(msg, FlowMod) or msg.op is not FlowModOp.DELETE_STRICT:
            return []
        effects: List[Effect] = []
        for mac in (msg.rule.match.dl_src, msg.rule.match.dl_dst):
            # Both direction rules of one intent are deleted together.
            if mac is None or (mac, now) in self._handled:
                continue
            self._handled.add((mac, now))
            reaction = pu_on_flow_delete(self.state, mac, now)
            if reaction.reannounce:
                effects += _inject(sw, self.state.local_port, reaction.reannounce)
        return effects


class PathResetSender(SwitchAgent):
    """Modulates a shared path: each 1-bit makes the controller reset it."""

    def __init__(self, state: AgentState, bits: Sequence[int], start_at: int):
        self.state = state
        self.bits = list(bits)
        self.start_at = start_at
        self.armed = False

    def on_start(self, sw: SwitchState, now: int) -> List[Effect]:
        return [StartTimer(max(self.start_at - now, 0), "pr-slot", 0)]

    def on_timer(self, sw: SwitchState, name: str, data, now: int) -> List[Effect]:
        if name != "pr-slot" or data >= len(self.bits):
            return []
        effects: List[Effect] = [StartTimer(self.state.slot, "pr-slot", data + 1)]
        try:
            action = pr_send_bit(self.state, self.bits[data], data, sw.table)
        except NoSharedPath as e:
            return effects + [TraceNote(str(e))]
        if action is PathResetAction.DELETE_OWN_FLOW:
            rule = shared_rule(self.state, sw.table)
            effects += local_delete(sw, rule.priority, rule.match)
        elif action is PathResetAction.PUNT_NEXT_FRAME:
            self.armed = True
        return effects

    def punt(self, sw: SwitchState, port: int, frame: Frame, rule: FlowRule, now: int) -> bool:
        if self.armed and self.state.flow == (frame.src, frame.dst):
            self.armed = False
            return True
        return False


class PathResetReceiver(SwitchAgent):
    """Observes FlowMod Adds for the shared flow and decodes one bit per slot."""

    def __init__(self, state: AgentState, start_at: int):
        self.state = state
        self.start_at = start_at
        self.events: List[SlotEvent] = []

    def on_flow_add(self, sw: SwitchState, rule: FlowRule, redundant: bool, now: int) -> List[Effect]:
        flow = self.state.flow
        if flow is None:
            return []
        pair = (rule.match.dl_src, rule.match.dl_dst)
        if pair == flow or pair == (flow[1], flow[0]):
            self.events.append(SlotEvent(now, "FlowAdd", redundant))
        return []

    def decode(self, n_bits: int) -> List[int]:
        self.state.rx_bits.clear()
        slot = self.state.slot
        for k in range(n_bits):
            lo = self.start_at + k * slot
            hi = lo + slot
            pr_decode_slot(self.state, [ev for ev in self.events if lo <= ev.t < hi])
        return list(self.state.rx_bits)


class SwitchIdAgent(SwitchAgent):
    """Claims secret DPIDs on extra connections and reads the controller's admission decisions."""

    def __init__(
        self,
        state: AgentState,
        start_at: int,
        spacing: int = 20 * MS,
        claims: Optional[Sequence[int]] = None,
        controller: Optional[str] = None,
    ):
        self.state = state
        self.start_at = start_at
        self.spacing = spacing
        self.claims = list(claims) if claims is not None else si_claims(state)
        self.controller = controller
        self.outcomes: List[Tuple[int, SiOutcome]] = []

    def on_start(self, sw: SwitchState, now: int) -> List[Effect]:
        if not self.claims:
            return []
        return [StartTimer(max(self.start_at - now, 0), "si-claim", 0)]

    def on_timer(self, sw: SwitchState, name: str, data, now: int) -> List[Effect]:
        if name != "si-claim" or data >= len(self.claims):
            return []
        effects: List[Effect] = [OpenConnection(self.claims[data], self.controller)]
        if data + 1 < len(self.claims):
            effects.append(StartTimer(self.spacing, "si-claim", data + 1))
        return effects

    def on_control(self, sw: SwitchState, msg, conn_id: int, now: int) -> List[Effect]:
        conn = sw.connections.get(conn_id)
        if conn is None or conn.dpid not in self.claims:
            return []
        outcome: Optional[SiOutcome] = None
        if isinstance(msg, Disconnect):
            outcome = Replaced(conn.dpid) if conn.was_master else Denied(conn.dpid)
        elif isinstance(msg, RoleRequest):
            outcome = RoleAssigned(conn.dpid, msg.role)
        if outcome is None:
            return []
        self.outcomes.append((now, outcome))
        si_rendezvous_step(self.state, outcome, now)
        return []


class OobSender(HostApp):
    """Sends a payload through the controller, one chunk per ``interval``."""

    def __init__(
        self,
        state: AgentState,
        payload: bytes,
        dst_mac: MacAddr,
        stealth: bool,
        start_at: int,
        interval: int = MS,
        chunk_size: int = DEFAULT_CHUNK,
        base_src: Optional[MacAddr] = None,
        tag: Optional[str] = None,
    ):
        self.state = state
        self.payload = payload
        self.dst_mac = dst_mac
        self.stealth = stealth
        self.start_at = start_at
        self.interval = interval
        self.chunk_size = chunk_size
        self.base_src = base_src
        self.tag = tag
        self.queue: List[Frame] = []

    def on_start(self, host: HostState, now: int) -> List[Effect]:
        return [StartTimer(max(self.start_at - now, 0), "oob-tx")]

    def on_timer(self, host: HostState, name: str, data, now: int) -> List[Effect]:
        if name != "oob-tx":
            return []
        if data is None:
            self.state.tx_queue = bytearray(self.payload)
            self.queue = oob_send(
                self.state, self.payload, self.dst_mac, self.stealth, self.chunk_size, self.base_src
            )
            data = 0
        if data >= len(self.queue):
            return []
        frame = replace(self.queue[data], born=now, tag=self.tag or self.queue[data].tag)
        effects = host_send(host, frame)
        if data + 1 < len(self.queue):
            effects.append(StartTimer(self.interval, "oob-tx", data + 1))
        return effects


class OobReceiver(HostApp):
    """Reassembles chunks arriving for this host."""

    def __init__(self, state: AgentState, ethertypes: Optional[Set[int]] = None):
        self.state = state
        self.ethertypes = ethertypes
        self.payload: Optional[bytes] = None
        self.completed_at: Optional[int] = None

    def on_receive(self, host: HostState, frame: Frame, now: int) -> List[Effect]:
        if frame.dst != host.mac:
            return []
        if self.ethertypes is not None and frame.ethertype not in self.ethertypes:
            return []
        done = oob_receive(self.state, frame)
        if done is not None and self.payload is None:
            self.payload = done
            self.completed_at = now
            return [TraceNote(f"{host.name}: out-of-band payload of {len(done)} bytes reassembled")]
        return []
