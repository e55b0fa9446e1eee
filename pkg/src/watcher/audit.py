"""Audit trail: alerts grouped by kind and the techniques they reveal."""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

from .watcher import Alert, AlertKind

TECHNIQUE_SIGNATURES = {
    "PathUpdate": (AlertKind.MOVING_MAC,),
    "PathReset": (AlertKind.PACKET_IN_WITH_LIVE_FLOW,),
    "SwitchId": (AlertKind.DPID_COLLISION,),
    "OobForward": (
        AlertKind.STEALTH_OOB,
        AlertKind.UNCORRELATED_PACKET_OUT,
        AlertKind.WAYPOINT_VIOLATION,
    ),
}

# What the watcher cannot see by construction.
RESIDUAL = (
    ("residual.steganography", "undetectable"),
    ("residual.path_reset_timing", "signature-only"),
)


@dataclass
class AuditReport:
    alerts: List[Alert] = field(default_factory=list)
    by_kind: Dict[str, int] = field(default_factory=dict)
    techniques: Dict[str, List[str]] = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return not self.alerts

    @property
    def denied(self) -> int:
        return sum(1 for a in self.alerts if a.blocking)

    def to_lines(self) -> List[str]:
        lines = [f"alerts.total={len(self.alerts)}"]
        if self.is_empty:
            return lines
        lines += [f"alerts.{kind}={count}" for kind, count in self.by_kind.items()]
        lines += [f"technique.{name}={'+'.join(kinds)}" for name, kinds in self.techniques.items()]
        lines.append(f"verdicts.deny={self.denied}")
        lines += [f"{key}={value}" for key, value in RESIDUAL]
        lines += [f"alert.{index}={alert.render()}" for index, alert in enumerate(self.alerts)]
        return lines

    def render(self) -> str:
        return "".join(line + "\n" for line in self.to_lines())


def audit_report(alerts: Sequence[Alert]) -> AuditReport:
    """Group ``alerts`` (in trace order) and name the techniques they reveal."""
    ordered = sorted(alerts, key=lambda a: (a.t, a.evidence, a.kind.value))
    counts = Counter(a.kind.value for a in ordered)
    techniques: Dict[str, List[str]] = {}
    for name, kinds in sorted(TECHNIQUE_SIGNATURES.items()):
        seen = [k.value for k in kinds if counts[k.value]]
        if seen:
            techniques[name] = seen
    return AuditReport(alerts=ordered, by_kind=dict(sorted(counts.items())), techniques=techniques)
