"""End hosts. Traffic generation and reactions live in pluggable host apps."""

from dataclasses import dataclass, field
from typing import FrozenSet, List, Set, Tuple

from ..protocol.messages import DEFAULT_RECOGNIZED_ETHERTYPES, Frame, MacAddr
from ..utils.errors import FrameError
from .effects import Delivered, Effect, EmitFrame, TraceNote

HOST_PORT = 0


@dataclass(frozen=True)
class HostCapabilities:
    masquerade_macs: bool = False
    arbitrary_ethertype: bool = False


class HostApp:
    """Base host application; subclasses override what they need."""

    def on_start(self, host: "HostState", now: int) -> List[Effect]:
        return []

    def on_receive(self, host: "HostState", frame: Frame, now: int) -> List[Effect]:
        return []

    def on_timer(self, host: "HostState", name: str, data, now: int) -> List[Effect]:
        return []


@dataclass
class HostState:
    name: str
    mac: MacAddr
    attached: Tuple[str, int]
    capabilities: HostCapabilities = field(default_factory=HostCapabilities)
    recognized: FrozenSet[int] = DEFAULT_RECOGNIZED_ETHERTYPES
    apps: List[HostApp] = field(default_factory=list)
    accept_macs: Set[MacAddr] = field(default_factory=set)
    received: List[Tuple[int, Frame]] = field(default_factory=list)


def host_send(host: HostState, frame: Frame) -> List[Effect]:
    """
    Queue a frame on the host's single interface.

    A benign host only sends with its own MAC and a recognized ethertype.
    """
    if frame.src != host.mac and not host.capabilities.masquerade_macs:
        raise FrameError(f"{host.name} may not send with source {frame.src}")
    if frame.ethertype not in host.recognized and not host.capabilities.arbitrary_ethertype:
        raise FrameError(f"{host.name} may not send ethertype 0x{frame.ethertype:04x}")
    return [EmitFrame(HOST_PORT, frame)]


def host_receive(host: HostState, frame: Frame, now: int) -> List[Effect]:
    """Accept frames addressed to the host, then let its apps react."""
    if frame.dst != host.mac and frame.dst not in host.accept_macs and not frame.dst.is_multicast:
        return [TraceNote(f"{host.name}: frame for {frame.dst} ignored")]
    host.received.append((now, frame))
    effects: List[Effect] = [Delivered(frame)]
    for app in host.apps:
        effects += app.on_receive(host, frame, now)
    return effects
