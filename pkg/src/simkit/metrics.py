"""Run metrics: link counters, per-flow delivery, teleportation channels and alerts."""

from collections import Counter
from dataclasses import dataclass, field
from statistics import fmean
from typing import Dict, List, Optional, Sequence, Union

from ..protocol.messages import Frame
from ..teleport.capacity import ChannelStats

Scalar = Union[int, float, str]


@dataclass
class LinkCounters:
    frames: int = 0
    bytes: int = 0

    def add(self, size: int) -> None:
        self.frames += 1
        self.bytes += size


@dataclass
class FlowStats:
    """Frames of one workload tag, counted from the sending host to the receiving host."""
    tag: str
    offered: int = 0
    delivered: int = 0
    delivered_bytes: int = 0
    teleported: int = 0
    latencies: List[int] = field(default_factory=list)
    arrivals: List[int] = field(default_factory=list)
    first_offer: Optional[int] = None

    def record_offer(self, now: int) -> None:
        self.offered += 1
        if self.first_offer is None:
            self.first_offer = now

    def record_delivery(self, frame: Frame, now: int, teleported: bool) -> None:
        self.delivered += 1
        self.delivered_bytes += len(frame.payload)
        self.teleported += int(teleported)
        self.latencies.append(now - frame.born)
        self.arrivals.append(now)

    @property
    def lost(self) -> int:
        return max(self.offered - self.delivered, 0)

    @property
    def span(self) -> int:
        if self.first_offer is None or not self.arrivals:
            return 0
        return self.arrivals[-1] - self.first_offer


def jitter_mad(arrivals: Sequence[int]) -> float:
    """Mean absolute deviation of inter-arrival deltas (0 with fewer than two deltas)."""
    deltas = [b - a for a, b in zip(arrivals, arrivals[1:])]
    if len(deltas) < 2:
        return 0.0
    mean = fmean(deltas)
    return fmean(abs(d - mean) for d in deltas)


@dataclass
class Metrics:
    duration: int = 0
    links: Dict[str, LinkCounters] = field(default_factory=dict)
    flows: Dict[str, FlowStats] = field(default_factory=dict)
    channels: Dict[str, ChannelStats] = field(default_factory=dict)
    control_messages: Counter = field(default_factory=Counter)
    control_bytes_in: int = 0
    control_bytes_out: int = 0
    control_drops: int = 0
    interswitch_frames: int = 0
    firewalls: Dict[str, Dict[str, int]] = field(default_factory=dict)
    nids_alerts: Dict[str, int] = field(default_factory=dict)
    alerts: Counter = field(default_factory=Counter)
    withheld: int = 0

    def link(self, src: str, dst: str) -> LinkCounters:
        return self.links.setdefault(f"{src}->{dst}", LinkCounters())

    def flow(self, tag: str) -> FlowStats:
        return self.flows.setdefault(tag, FlowStats(tag))

    def channel(self, tag: str) -> ChannelStats:
        return self.channels.setdefault(tag, ChannelStats(tag))

    def finish(self, duration: int) -> None:
        """Close the run: channel goodput over each channel's active span."""
        self.duration = duration
        for tag, stats in self.channels.items():
            flow = self.flows.get(tag)
            if flow is None:
                stats.finish(0)
                continue
            stats.finish(flow.span or duration, jitter_mad(flow.arrivals))


def _fmt(value: Scalar) -> str:
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def metrics_summary(m: Metrics) -> Dict[str, Scalar]:
    """
    Flatten metrics into an ordered key/value report.

    Args:
        m: Metrics of a finished run

    Returns:
        Ordered mapping; keys are stable for a given scenario
    """
    offered = sum(f.offered for f in m.flows.values())
    delivered = sum(f.delivered for f in m.flows.values())
    payload = sum(f.delivered_bytes for f in m.flows.values())
    arrivals = sorted(t for f in m.flows.values() for t in f.arrivals)
    latencies = [x for f in m.flows.values() for x in f.latencies]

    out: Dict[str, Scalar] = {
        "duration_ns": m.duration,
        "frames_offered": offered,
        "frames_delivered": delivered,
        "frames_lost": max(offered - delivered, 0),
        "loss": (offered - delivered) / offered if offered else 0.0,
        "goodput_bps": 8 * payload * 1_000_000_000 / m.duration if m.duration > 0 else 0.0,
        "jitter_ns": jitter_mad(arrivals),
        "latency_mean_ns": fmean(latencies) if latencies else 0.0,
        "packet_ins": m.control_messages["PacketIn"],
        "packet_outs": m.control_messages["PacketOut"],
        "flow_adds": m.control_messages["FlowAdd"],
        "flow_deletes": m.control_messages["FlowDelete"],
        "flow_removed": m.control_messages["FlowRemoved"],
        "control_bytes_in": m.control_bytes_in,
        "control_bytes_out": m.control_bytes_out,
        "control_drops": m.control_drops,
        "interswitch_frames": m.interswitch_frames,
        "withheld_packet_outs": m.withheld,
    }
    for name in sorted(m.firewalls):
        for key in ("accepted", "dropped"):
            out[f"firewall.{name}.{key}"] = m.firewalls[name][key]
    for name in sorted(m.nids_alerts):
        out[f"nids.{name}.alerts"] = m.nids_alerts[name]
    for tag in sorted(m.flows):
        f = m.flows[tag]
        out[f"flow.{tag}.offered"] = f.offered
        out[f"flow.{tag}.delivered"] = f.delivered
        out[f"flow.{tag}.teleported"] = f.teleported
        out[f"flow.{tag}.bytes"] = f.delivered_bytes
        out[f"flow.{tag}.jitter_ns"] = jitter_mad(f.arrivals)
    for tag in sorted(m.channels):
        c = m.channels[tag]
        out[f"channel.{tag}.packets_in"] = c.packets_in
        out[f"channel.{tag}.packets_out"] = c.packets_out
        out[f"channel.{tag}.control_bytes_in"] = c.control_bytes_in
        out[f"channel.{tag}.control_bytes_out"] = c.control_bytes_out
        out[f"channel.{tag}.delivered"] = c.delivered
        out[f"channel.{tag}.lost"] = c.lost
        out[f"channel.{tag}.goodput_bps"] = c.goodput_bps
    for kind in sorted(m.alerts):
        out[f"alerts.{kind}"] = m.alerts[kind]
    return out


def format_kv(summary: Dict[str, Scalar]) -> str:
    return "".join(f"{key}={_fmt(value)}\n" for key, value in summary.items())
