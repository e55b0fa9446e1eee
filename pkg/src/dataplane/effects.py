"""Effects returned by data-plane state machines and consumed by the engine."""

from dataclasses import dataclass, field
from typing import Any, Optional, Union

from ..protocol.messages import ControlMessage, Frame


@dataclass(frozen=True)
class EmitFrame:
    """Transmit ``frame`` out of ``port``."""
    port: int
    frame: Frame


@dataclass(frozen=True)
class SendControl:
    """Send a control message; ``conn_id=None`` means the primary connection."""
    msg: ControlMessage
    conn_id: Optional[int] = None


@dataclass(frozen=True)
class TraceNote:
    text: str


@dataclass(frozen=True)
class StartTimer:
    """Call back the owning agent/app after ``delay`` ns."""
    delay: int
    name: str
    data: Any = field(default=None, compare=False)


@dataclass(frozen=True)
class OpenConnection:
    """Open an extra controller connection claiming ``dpid``."""
    dpid: int
    controller: Optional[str] = None


@dataclass(frozen=True)
class Delivered:
    """A host accepted a frame addressed to it."""
    frame: Frame


Effect = Union[EmitFrame, SendControl, TraceNote, StartTimer, OpenConnection, Delivered]
