"""Error types shared across Teleport Lab packages."""

from typing import Optional


class TeleportLabError(Exception):
    """Base class for every error raised by Teleport Lab."""


class ConfigError(TeleportLabError, ValueError):
    """Invalid scenario, policy or run configuration."""


class ParseError(TeleportLabError, ValueError):
    """Malformed trace, scenario or policy text."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class FrameError(TeleportLabError, ValueError):
    """A frame violates size or field limits."""


class ResubmitLoop(TeleportLabError):
    """A second resubmit was requested within one ingress event."""


class UnknownRule(TeleportLabError):
    """DeleteStrict named a rule that is not in the table."""


class InvalidDpid(TeleportLabError, ValueError):
    """A switch claimed datapath id 0."""


class UnknownSwitch(TeleportLabError):
    """A message arrived on a connection that has not been admitted."""


class OutOfRange(TeleportLabError, IndexError):
    """An agent index lies outside [1, m]."""


class NotReady(TeleportLabError):
    """An agent precondition does not hold yet."""


class NoSharedPath(TeleportLabError):
    """The path reset sender holds no rule of the shared intent."""


class Oversize(TeleportLabError, ValueError):
    """A chunk does not fit in a frame."""


class ZeroPayload(TeleportLabError, ValueError):
    """Capacity arithmetic needs a positive payload size."""


class UnknownScenario(TeleportLabError, KeyError):
    """No scenario of that name exists."""


class EventOverflow(TeleportLabError):
    """The pending event queue exceeded its configured bound."""


class OutOfOrder(TeleportLabError):
    """Trace records were observed with regressing time."""


class CapabilityError(TeleportLabError):
    """A switch attempted something its capability flags do not allow."""
