"""Zone/waypoint policy and the PacketOut waypoint check."""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from ..protocol.messages import FrameSummary, MacAddr
from ..simkit.scenario import Mac, Scenario, StrList


class PolicyHost(BaseModel):
    name: str
    mac: Mac
    switch: str
    port: int = Field(ge=1)
    zone: Optional[str] = None


class Waypoint(BaseModel):
    between: StrList
    via: StrList
    directed: bool = False

    @field_validator("between")
    @classmethod
    def _pair(cls, value):
        if len(value) != 2:
            raise ValueError("waypoint 'between' names exactly two zones")
        return value


class WaypointPolicy(BaseModel):
    hosts: List[PolicyHost] = Field(default_factory=list)
    waypoints: List[Waypoint] = Field(default_factory=list)

    @model_validator(mode="after")
    def _partition(self):
        seen: Dict[str, str] = {}
        for h in self.hosts:
            if h.name in seen:
                raise ValueError(f"host {h.name} listed twice")
            seen[h.name] = h.zone or ""
        return self

    @property
    def zones(self) -> Dict[str, Optional[str]]:
        return {h.name: h.zone for h in self.hosts}

    def host_at(self, switch: str, port: int) -> Optional[PolicyHost]:
        for h in self.hosts:
            if h.switch == switch and h.port == port:
                return h
        return None

    def required(self, origin_zone: str, egress_zone: str) -> List[str]:
        """Waypoints mandated between two zones; none within a zone."""
        if origin_zone == egress_zone:
            return []
        nodes: List[str] = []
        for wp in self.waypoints:
            a, b = wp.between
            if (a, b) == (origin_zone, egress_zone) or (not wp.directed and (b, a) == (origin_zone, egress_zone)):
                nodes += [n for n in wp.via if n not in nodes]
        return nodes


class Decision(str, Enum):
    ALLOW = "Allow"
    DENY = "Deny"


@dataclass(frozen=True)
class PacketOutContext:
    """
    Where a controller-emitted frame came from and where it leaves.

    ``origin`` is (switch, in_port) of the causal PacketIn, ``None`` when the
    PacketOut has no causal PacketIn. ``path`` lists the nodes the frame
    traverses between the two; a direct PacketOut traverses none.
    """
    origin: Optional[Tuple[str, int]]
    egress_switch: str
    egress_ports: Tuple[int, ...]
    frame: FrameSummary
    path: Tuple[str, ...] = ()


def enforce_waypoint(policy: WaypointPolicy, ctx: PacketOutContext) -> Tuple[Decision, str]:
    """
    Check a PacketOut against the waypoint policy (fail-closed).

    Returns:
        (decision, reason)
    """
    if ctx.origin is None:
        return Decision.DENY, "no causal PacketIn"
    origin = policy.host_at(*ctx.origin)
    if origin is None or MacAddr.parse(origin.mac) != ctx.frame.src or origin.zone is None:
        return Decision.DENY, f"origin {ctx.frame.src} at {ctx.origin[0]}:{ctx.origin[1]} unresolvable"
    if not ctx.egress_ports:
        return Decision.DENY, "PacketOut without output port"
    for port in ctx.egress_ports:
        egress = policy.host_at(ctx.egress_switch, port)
        if egress is None or egress.zone is None:
            return Decision.DENY, f"egress {ctx.egress_switch}:{port} unresolvable"
        missing = [n for n in policy.required(origin.zone, egress.zone) if n not in ctx.path]
        if missing:
            return Decision.DENY, f"{origin.zone}->{egress.zone} bypasses {','.join(missing)}"
    return Decision.ALLOW, "ok"


def policy_from_scenario(scn: Scenario) -> Optional[WaypointPolicy]:
    """The scenario's zones and waypoints, or None when it declares no waypoint."""
    if not scn.waypoints:
        return None
    hosts = [
        PolicyHost(name=h.name, mac=h.mac, switch=h.switch, port=h.port, zone=scn.zone_of(h))
        for h in scn.hosts
    ]
    waypoints = [Waypoint(between=w.between, via=w.via, directed=w.directed) for w in scn.waypoints]
    return WaypointPolicy(hosts=hosts, waypoints=waypoints)
