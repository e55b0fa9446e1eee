"""
PacketIn/PacketOut watcher.

It is fed trace records one by one, online from the simulator or offline
from a trace file, and keeps just enough state to correlate control
messages: learned MAC locations, the rules it saw installed, DPID owners
and PacketIns waiting for their PacketOut.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

from ..protocol.messages import FlowRemovedReason, FrameSummary, MacAddr, MatchFields
from ..protocol.trace import ParsedMsg, TraceRecord, frame_summary, match_from_fields, output_ports
from ..utils.durations import MS
from ..utils.errors import OutOfOrder
from ..utils.logger import get_logger
from .policy import Decision, PacketOutContext, WaypointPolicy, enforce_waypoint

logger = get_logger(__name__)

DEFAULT_WINDOW = 5 * MS


class AlertKind(str, Enum):
    WAYPOINT_VIOLATION = "WaypointViolation"
    MOVING_MAC = "MovingMac"
    PACKET_IN_WITH_LIVE_FLOW = "PacketInWithLiveFlow"
    DPID_COLLISION = "DpidCollision"
    UNCORRELATED_PACKET_OUT = "UncorrelatedPacketOut"
    STEALTH_OOB = "StealthOob"


@dataclass(frozen=True)
class Alert:
    t: int
    kind: AlertKind
    subjects: Tuple[str, ...]
    evidence: Tuple[int, ...]
    blocking: bool = False
    detail: str = ""

    def __post_init__(self):
        if not self.evidence:
            raise ValueError("an alert must cite at least one trace record")

    def render(self) -> str:
        subjects = ",".join(self.subjects) or "-"
        evidence = ",".join(str(s) for s in self.evidence)
        text = f"t={self.t} kind={self.kind.value} subjects={subjects} evidence={evidence}"
        if self.blocking:
            text += " verdict=Deny"
        return text


@dataclass
class _InstalledRule:
    cookie: int
    added: int
    # seq of a FlowRemoved{Delete} the controller never asked for
    removed_by_switch: Optional[int] = None


@dataclass
class _PendingPair:
    packet_in: int
    packet_out: int
    t: int
    subjects: Tuple[str, ...]


@dataclass
class Watcher:
    """
    Args:
        policy: Waypoint policy; without one no waypoint checks run
        window: StealthOob correlation window and rule-install grace period
        strict_mobility: Make MovingMac a blocking alert
    """
    policy: Optional[WaypointPolicy] = None
    window: int = DEFAULT_WINDOW
    strict_mobility: bool = False
    alerts: List[Alert] = field(default_factory=list)
    records: int = 0
    _last_t: int = 0
    _packet_ins: Dict[int, Tuple[TraceRecord, ParsedMsg]] = field(default_factory=dict)
    _learned: Dict[MacAddr, Tuple[str, int]] = field(default_factory=dict)
    _rules: Dict[Tuple[str, int, MatchFields], _InstalledRule] = field(default_factory=dict)
    _live_alerted: Set[Tuple[str, MatchFields]] = field(default_factory=set)
    _dpid_owner: Dict[int, str] = field(default_factory=dict)
    _collisions: Set[Tuple[int, str]] = field(default_factory=set)
    _pending: "OrderedDict[int, _PendingPair]" = field(default_factory=OrderedDict)
    blocked: Set[int] = field(default_factory=set)

    def observe(self, rec: TraceRecord) -> List[Alert]:
        """Consume one record in trace order and return the alerts it raised."""
        if rec.t < self._last_t:
            raise OutOfOrder(f"record at t={rec.t} after t={self._last_t}")
        self._last_t = rec.t
        self.records += 1
        out = self._flush_pending(rec.t)
        if rec.kind != "control":
            return self._keep(out)
        parsed = rec.parsed
        handler = getattr(self, f"_on_{parsed.name}", None)
        if handler is not None:
            out += handler(rec, parsed)
        return self._keep(out)

    def observe_all(self, records: Iterable[TraceRecord]) -> List[Alert]:
        out: List[Alert] = []
        for rec in records:
            out += self.observe(rec)
        return out + self.finish()

    def finish(self) -> List[Alert]:
        """Flush correlation state at the end of the trace."""
        return self._keep(self._flush_pending(None))

    def _keep(self, alerts: List[Alert]) -> List[Alert]:
        for alert in alerts:
            logger.debug(f"alert {alert.render()}")
            if alert.blocking:
                self.blocked.add(alert.evidence[0])
        self.alerts += alerts
        return alerts

    # correlation handlers

    def _on_PacketIn(self, rec: TraceRecord, parsed: ParsedMsg) -> List[Alert]:
        self._packet_ins[parsed.seq] = (rec, parsed)
        frame = frame_summary(parsed)
        in_port = int(parsed.fields["in_port"])
        out: List[Alert] = []

        if not frame.src.is_multicast:
            here = (rec.src, in_port)
            before = self._learned.get(frame.src)
            if before is not None and before != here:
                out.append(Alert(
                    t=rec.t,
                    kind=AlertKind.MOVING_MAC,
                    subjects=(str(frame.src), f"{before[0]}:{before[1]}", f"{here[0]}:{here[1]}"),
                    evidence=(parsed.seq,),
                    blocking=self.strict_mobility,
                ))
                if self.strict_mobility:
                    # Blocks what the controller does in reaction to the move.
                    self.blocked.add(parsed.seq)
            self._learned[frame.src] = here

        if parsed.get("reason") == "TableMiss":
            live = self._live_rule(rec.src, frame, in_port, rec.t)
            if live is not None:
                key, rule = live
                if (rec.src, key[2]) not in self._live_alerted:
                    self._live_alerted.add((rec.src, key[2]))
                    evidence = (parsed.seq,)
                    if rule.removed_by_switch is not None:
                        evidence += (rule.removed_by_switch,)
                    out.append(Alert(
                        t=rec.t,
                        kind=AlertKind.PACKET_IN_WITH_LIVE_FLOW,
                        subjects=(rec.src, f"cookie:{rule.cookie}"),
                        evidence=evidence,
                        detail="rule deleted by the switch" if rule.removed_by_switch is not None else "",
                    ))
        return out

    def _live_rule(self, switch: str, frame: FrameSummary, in_port: int, now: int):
        best = None
        for key, rule in self._rules.items():
            sw, priority, match = key
            if sw != switch or now - rule.added < self.window:
                continue
            if match.matches(frame, in_port) and (best is None or priority > best[0][1]):
                best = (key, rule)
        return best

    def _on_PacketOut(self, rec: TraceRecord, parsed: ParsedMsg) -> List[Alert]:
        frame = frame_summary(parsed)
        ports = tuple(output_ports(parsed))
        cause = self._packet_ins.get(parsed.cause)
        out: List[Alert] = []
        origin = None
        subjects = (rec.dst, str(frame.src), str(frame.dst))

        if cause is None:
            out.append(Alert(rec.t, AlertKind.UNCORRELATED_PACKET_OUT, subjects, (parsed.seq,)))
        else:
            pin_rec, pin = cause
            pin_frame = frame_summary(pin)
            # The controller may rewrite the destination, nothing else.
            if (pin_frame.src, pin_frame.ethertype, pin_frame.digest) != (frame.src, frame.ethertype, frame.digest):
                out.append(Alert(rec.t, AlertKind.UNCORRELATED_PACKET_OUT, subjects, (parsed.seq, pin.seq)))
            origin = (pin_rec.src, int(pin.fields["in_port"]))
            if pin.seq not in self._pending:
                self._pending[pin.seq] = _PendingPair(pin.seq, parsed.seq, rec.t, subjects)

        if self.policy is not None:
            ctx = PacketOutContext(origin=origin, egress_switch=rec.dst, egress_ports=ports, frame=frame)
            decision, reason = enforce_waypoint(self.policy, ctx)
            if decision is Decision.DENY:
                evidence = (parsed.seq,) if cause is None else (parsed.seq, parsed.cause)
                out.append(Alert(
                    t=rec.t,
                    kind=AlertKind.WAYPOINT_VIOLATION,
                    subjects=subjects,
                    evidence=evidence,
                    blocking=True,
                    detail=reason,
                ))
        return out

    def _on_FlowAdd(self, rec: TraceRecord, parsed: ParsedMsg) -> List[Alert]:
        match = match_from_fields(parsed)
        priority = int(parsed.fields["priority"])
        self._rules[(rec.dst, priority, match)] = _InstalledRule(int(parsed.fields["cookie"]), rec.t)
        self._live_alerted.discard((rec.dst, match))
        self._pending.pop(parsed.cause, None)
        return []

    def _on_FlowDelete(self, rec: TraceRecord, parsed: ParsedMsg) -> List[Alert]:
        self._rules.pop((rec.dst, int(parsed.fields["priority"]), match_from_fields(parsed)), None)
        self._pending.pop(parsed.cause, None)
        return []

    def _on_FlowRemoved(self, rec: TraceRecord, parsed: ParsedMsg) -> List[Alert]:
        key = (rec.src, int(parsed.fields["priority"]), match_from_fields(parsed))
        rule = self._rules.get(key)
        if rule is None:
            return []
        if parsed.get("reason") == FlowRemovedReason.DELETE.value:
            # The controller still holds the rule: the next miss on it is a live-flow PacketIn.
            rule.removed_by_switch = parsed.seq
        else:
            del self._rules[key]
        return []

    def _on_FeaturesReply(self, rec: TraceRecord, parsed: ParsedMsg) -> List[Alert]:
        dpid = int(parsed.fields["dpid"])
        owner = self._dpid_owner.setdefault(dpid, rec.src)
        if owner == rec.src or (dpid, rec.src) in self._collisions:
            return []
        self._collisions.add((dpid, rec.src))
        return [Alert(rec.t, AlertKind.DPID_COLLISION, (str(dpid), owner, rec.src), (parsed.seq,))]

    def _flush_pending(self, now: Optional[int]) -> List[Alert]:
        out: List[Alert] = []
        while self._pending:
            seq, pair = next(iter(self._pending.items()))
            if now is not None and now <= pair.t + self.window:
                break
            del self._pending[seq]
            out.append(Alert(
                t=pair.t + self.window,
                kind=AlertKind.STEALTH_OOB,
                subjects=pair.subjects,
                evidence=(pair.packet_in, pair.packet_out),
            ))
        return out
