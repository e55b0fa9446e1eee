"""Transparent bump-in-the-wire middleboxes: an ebtables-like firewall and a NIDS tap."""

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from ..protocol.messages import Frame, MacAddr


class Verdict(str, Enum):
    ACCEPT = "Accept"
    DROP = "Drop"


@dataclass(frozen=True)
class FirewallRule:
    src: Optional[MacAddr] = None
    ethertype: Optional[int] = None
    verdict: Verdict = Verdict.DROP

    def matches(self, frame: Frame) -> bool:
        if self.src is not None and frame.src != self.src:
            return False
        if self.ethertype is not None and frame.ethertype != self.ethertype:
            return False
        return True


@dataclass
class FirewallState:
    name: str
    rules: List[FirewallRule] = field(default_factory=list)
    default: Verdict = Verdict.DROP
    counters: List[int] = field(default_factory=list)
    default_count: int = 0
    accepted: int = 0
    dropped: int = 0
    drops_by_flow: Counter = field(default_factory=Counter)

    def __post_init__(self):
        if len(self.counters) != len(self.rules):
            self.counters = [0] * len(self.rules)

    @property
    def offered(self) -> int:
        return self.accepted + self.dropped


def firewall_filter(fw: FirewallState, frame: Frame) -> Verdict:
    """First matching rule decides; otherwise the default verdict."""
    verdict = fw.default
    for index, rule in enumerate(fw.rules):
        if rule.matches(frame):
            fw.counters[index] += 1
            verdict = rule.verdict
            break
    else:
        fw.default_count += 1
    if verdict is Verdict.ACCEPT:
        fw.accepted += 1
    else:
        fw.dropped += 1
        fw.drops_by_flow[(str(frame.src), str(frame.dst))] += 1
    return verdict


@dataclass
class NidsState:
    """Passive observer raising an alert for every TCP FIN-scan frame it sees."""
    name: str
    alerts: List[Tuple[int, str, str, Optional[int]]] = field(default_factory=list)
    inspected: int = 0


def nids_inspect(nids: NidsState, frame: Frame, now: int) -> bool:
    nids.inspected += 1
    if frame.tp_proto == "tcp" and frame.tcp_flags == frozenset({"fin"}):
        nids.alerts.append((now, str(frame.src), str(frame.dst), frame.tp_dst))
        return True
    return False
