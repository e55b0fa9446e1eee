"""Sim-time helpers. All simulation times are integer nanoseconds."""

import re
from typing import Union

from .errors import ConfigError

NS = 1
US = 1_000
MS = 1_000_000
SECOND = 1_000_000_000

_UNITS = {"ns": NS, "us": US, "ms": MS, "s": SECOND}
_DURATION = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(ns|us|ms|s)?\s*$")


def parse_duration(value: Union[int, float, str]) -> int:
    """Convert ``"100ms"``, ``"1.5s"`` or a bare nanosecond count to ns."""
    if isinstance(value, bool):
        raise ConfigError(f"invalid duration: {value!r}")
    if isinstance(value, (int, float)):
        if value < 0:
            raise ConfigError(f"negative duration: {value!r}")
        return int(value)
    match = _DURATION.match(value)
    if not match:
        raise ConfigError(f"invalid duration: {value!r}")
    number, unit = match.groups()
    return int(round(float(number) * _UNITS[unit or "ns"]))


def format_ms(t_ns: int) -> str:
    return f"{t_ns / MS:.3f}"
