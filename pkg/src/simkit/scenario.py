"""Declarative scenario description (pydantic models)."""

from typing import Annotated, Dict, List, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator, model_validator

from ..controller.admission import AdmissionPolicy
from ..controller.controller import ControllerSettings
from ..dataplane.middlebox import FirewallRule, Verdict
from ..protocol.messages import (
    DEFAULT_RECOGNIZED_ETHERTYPES,
    Drop,
    MacAddr,
    MatchFields,
    Output,
    Resubmit,
    SetDlDst,
    ToController,
)
from ..utils.durations import MS, SECOND, US, parse_duration

Duration = Annotated[int, BeforeValidator(parse_duration)]


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def _int_auto(value):
    if isinstance(value, str):
        return int(value.strip(), 0)
    return value


IntList = Annotated[List[Annotated[int, BeforeValidator(_int_auto)]], BeforeValidator(_split_list)]
StrList = Annotated[List[str], BeforeValidator(_split_list)]
AutoInt = Annotated[int, BeforeValidator(_int_auto)]


def _check_mac(value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    return str(MacAddr.parse(value))


Mac = Annotated[str, BeforeValidator(_check_mac)]


class ControllerConfig(BaseModel):
    policy: AdmissionPolicy = AdmissionPolicy.DENY_SECOND
    recognized_ethertypes: IntList = Field(default_factory=lambda: sorted(DEFAULT_RECOGNIZED_ETHERTYPES))
    paved_priority: int = Field(default=100, ge=0, le=0xFFFF)
    paved_idle_timeout: Optional[Duration] = 10 * SECOND
    intent_delay: Duration = 3 * MS
    distributed: bool = False
    names: StrList = Field(default_factory=lambda: ["c0"])

    @model_validator(mode="after")
    def _frontends(self):
        if not self.names:
            raise ValueError("at least one controller frontend is required")
        if self.distributed and len(self.names) < 2:
            raise ValueError("distributed mode needs two or more frontends")
        return self

    def settings(self) -> ControllerSettings:
        return ControllerSettings(
            policy=self.policy,
            recognized_ethertypes=frozenset(self.recognized_ethertypes),
            paved_priority=self.paved_priority,
            paved_idle_timeout=self.paved_idle_timeout,
            intent_delay=self.intent_delay,
            distributed=self.distributed,
        )


class SwitchSpec(BaseModel):
    name: str
    dpid: AutoInt = Field(gt=0)
    controller: Optional[str] = None
    inject_packet_in: bool = False
    ignore_rules: bool = False
    claim_dpid: Optional[IntList] = None
    local_rewrite_rules: bool = False


class HostSpec(BaseModel):
    name: str
    mac: Mac
    switch: str
    port: int = Field(ge=1)
    zone: Optional[str] = None
    masquerade_macs: bool = False
    arbitrary_ethertype: bool = False


class LinkSpec(BaseModel):
    """A data link between two node ports; middleboxes use ports 1 and 2."""
    a: str
    a_port: int = Field(ge=1)
    b: str
    b_port: int = Field(ge=1)
    latency: Duration = 1 * MS


class FirewallSpec(BaseModel):
    name: str
    rules: List[Tuple[str, str, str]] = Field(default_factory=list)
    default: Verdict = Verdict.DROP

    @field_validator("rules", mode="before")
    @classmethod
    def _parse_rules(cls, value):
        # "field value verdict; field value verdict"
        if isinstance(value, str):
            out = []
            for item in value.split(";"):
                if item.strip():
                    parts = item.split()
                    if len(parts) != 3:
                        raise ValueError(f"firewall rule needs 'field value verdict': {item!r}")
                    out.append(tuple(parts))
            return out
        return value

    @field_validator("rules")
    @classmethod
    def _check_rules(cls, value):
        for field, arg, verdict in value:
            if field not in ("src", "ethertype"):
                raise ValueError(f"unknown firewall match field {field!r}")
            Verdict(verdict.capitalize())
            if field == "src":
                MacAddr.parse(arg)
            else:
                int(arg, 0)
        return value

    def firewall_rules(self) -> List[FirewallRule]:
        out = []
        for field, arg, verdict in self.rules:
            v = Verdict(verdict.capitalize())
            if field == "src":
                out.append(FirewallRule(src=MacAddr.parse(arg), verdict=v))
            else:
                out.append(FirewallRule(ethertype=int(arg, 0), verdict=v))
        return out


class NidsSpec(BaseModel):
    name: str


class RuleSpec(BaseModel):
    """A rule preinstalled on a switch, written in ovs-ofctl style."""
    switch: str
    priority: int = Field(ge=0, le=0xFFFF)
    cookie: AutoInt = 0
    in_port: Optional[int] = None
    dl_src: Optional[Mac] = None
    dl_dst: Optional[Mac] = None
    ethertype: Optional[AutoInt] = None
    tp_src: Optional[int] = None
    tp_dst: Optional[int] = None
    tcp_flags: Optional[str] = None
    actions: str = "drop"
    idle_timeout: Optional[Duration] = None

    def match(self) -> MatchFields:
        return MatchFields(
            in_port=self.in_port,
            dl_src=MacAddr.parse(self.dl_src) if self.dl_src else None,
            dl_dst=MacAddr.parse(self.dl_dst) if self.dl_dst else None,
            ethertype=self.ethertype,
            tp_src=self.tp_src,
            tp_dst=self.tp_dst,
            tcp_flags=frozenset(self.tcp_flags.split("+")) if self.tcp_flags else None,
        )

    def action_list(self) -> tuple:
        return parse_actions(self.actions)


def parse_actions(text: str) -> tuple:
    actions = []
    for item in (part.strip() for part in text.split(",")):
        if not item:
            continue
        name, _, arg = item.partition(":")
        if name == "output":
            actions.append(Output(int(arg)))
        elif name == "mod_dl_dst":
            actions.append(SetDlDst(MacAddr.parse(arg)))
        elif name == "resubmit":
            actions.append(Resubmit())
        elif name == "drop":
            actions.append(Drop())
        elif name == "controller":
            actions.append(ToController())
        else:
            raise ValueError(f"unknown action {item!r}")
    return tuple(actions)


class AgentSpec(BaseModel):
    """A malicious agent attached to a switch (implicit techniques) or host (OOB)."""
    node: str
    technique: str
    id: int = Field(default=1, ge=1)
    m: int = Field(default=2, ge=1)
    salt: str = "teleport"
    slot: Duration = 100 * MS
    start: Duration = 100 * MS
    role: str = "sender"
    stealth: bool = False
    payload_hex: Optional[str] = None
    payload_file: Optional[str] = None
    payload_size: int = Field(default=0, ge=0)
    chunk: int = Field(default=1024, gt=0)
    interval: Duration = 1 * MS
    dst: Optional[Mac] = None
    flow_src: Optional[Mac] = None
    flow_dst: Optional[Mac] = None
    bits: Optional[str] = None
    mode: str = "delete"
    claims: Optional[IntList] = None
    controller: Optional[str] = None
    local_port: Optional[int] = None
    spacing: Duration = 20 * MS

    @field_validator("technique")
    @classmethod
    def _technique(cls, value):
        if value not in ("PathUpdate", "PathReset", "SwitchId", "OobForward"):
            raise ValueError(f"unknown technique {value!r}")
        return value

    @field_validator("bits")
    @classmethod
    def _bits(cls, value):
        if value is not None and (not value or set(value) - {"0", "1"}):
            raise ValueError("bits must be a non-empty string of 0 and 1")
        return value

    @model_validator(mode="after")
    def _index(self):
        if self.id > self.m:
            raise ValueError(f"agent id {self.id} exceeds m={self.m}")
        if self.mode not in ("punt", "delete"):
            raise ValueError(f"unknown path reset mode {self.mode!r}")
        return self

    def payload(self) -> bytes:
        if self.payload_hex:
            return bytes.fromhex(self.payload_hex)
        if self.payload_file:
            with open(self.payload_file, "rb") as f:
                return f.read()
        return b""


class WorkloadSpec(BaseModel):
    """
    One traffic generator.

    kinds: announce, ping, probe, http, finscan, stream, mitm, del_flow
    """
    kind: str
    src: str
    dst: Optional[str] = None
    start: Duration = 50 * MS
    interval: Duration = 100 * MS
    count: int = Field(default=1, ge=0)
    payload_size: int = Field(default=56, ge=0, le=9000)
    rate_pps: Optional[float] = Field(default=None, gt=0)
    duration: Optional[Duration] = None
    ethertype: AutoInt = 0x0800
    masquerade: bool = False
    identical: bool = False
    ports: Optional[IntList] = None
    body: str = "<html>good</html>"
    find: str = "good"
    replace: str = "evil"
    tag: Optional[str] = None
    priority: Optional[int] = None
    match_src: Optional[Mac] = None
    match_dst: Optional[Mac] = None

    @field_validator("kind")
    @classmethod
    def _kind(cls, value):
        if value not in ("announce", "ping", "probe", "http", "finscan", "stream", "mitm", "del_flow"):
            raise ValueError(f"unknown workload kind {value!r}")
        return value


class WaypointSpec(BaseModel):
    between: StrList
    via: StrList
    directed: bool = False

    @field_validator("between")
    @classmethod
    def _pair(cls, value):
        if len(value) != 2:
            raise ValueError("waypoint 'between' names exactly two zones")
        return value


class Scenario(BaseModel):
    model_config = ConfigDict(validate_assignment=True)

    name: str
    description: str = ""
    family: str = ""
    seed: int = 1
    duration: Duration = 1 * SECOND
    control_latency: Duration = 500 * US
    capacity_bps: Optional[float] = Field(default=None, gt=0)
    controller: ControllerConfig = Field(default_factory=ControllerConfig)
    switches: List[SwitchSpec] = Field(default_factory=list)
    hosts: List[HostSpec] = Field(default_factory=list)
    links: List[LinkSpec] = Field(default_factory=list)
    firewalls: List[FirewallSpec] = Field(default_factory=list)
    nids: List[NidsSpec] = Field(default_factory=list)
    rules: List[RuleSpec] = Field(default_factory=list)
    agents: List[AgentSpec] = Field(default_factory=list)
    workload: List[WorkloadSpec] = Field(default_factory=list)
    zones: Dict[str, StrList] = Field(default_factory=dict)
    waypoints: List[WaypointSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _references(self):
        names = [n.name for n in self.switches] + [h.name for h in self.hosts]
        names += [f.name for f in self.firewalls] + [n.name for n in self.nids]
        if len(names) != len(set(names)):
            raise ValueError("node names must be unique")
        known = set(names)
        switches = {s.name for s in self.switches}
        hosts = {h.name for h in self.hosts}
        for sw in self.switches:
            if sw.controller is not None and sw.controller not in self.controller.names:
                raise ValueError(f"switch {sw.name} names unknown controller {sw.controller}")
        for h in self.hosts:
            if h.switch not in switches:
                raise ValueError(f"host {h.name} attached to unknown switch {h.switch}")
        for link in self.links:
            for end in (link.a, link.b):
                if end not in known:
                    raise ValueError(f"link references unknown node {end}")
        for rule in self.rules:
            if rule.switch not in switches:
                raise ValueError(f"rule references unknown switch {rule.switch}")
        for agent in self.agents:
            if agent.node not in known:
                raise ValueError(f"agent references unknown node {agent.node}")
        for item in self.workload:
            if item.src not in known:
                raise ValueError(f"workload references unknown node {item.src}")
            if item.dst is not None and item.dst not in hosts:
                raise ValueError(f"workload destination {item.dst} is not a host")
        for zone, members in self.zones.items():
            for member in members:
                if member not in hosts:
                    raise ValueError(f"zone {zone} lists unknown host {member}")
        return self

    def host(self, name: str) -> HostSpec:
        for h in self.hosts:
            if h.name == name:
                return h
        raise KeyError(name)

    def zone_of(self, host: HostSpec) -> Optional[str]:
        if host.zone is not None:
            return host.zone
        for zone, members in sorted(self.zones.items()):
            if host.name in members:
                return zone
        return None
