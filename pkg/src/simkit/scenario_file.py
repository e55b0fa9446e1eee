"""
Scenario and policy files.

A file is a sequence of ``[kind]`` or ``[kind name]`` sections, each
followed by ``key=value`` lines. ``#`` starts a comment. Sections may
repeat (one ``[link]`` per link, one ``[workload]`` per generator).
"""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

from pydantic import ValidationError

from ..utils.errors import ParseError
from ..utils.logger import get_logger
from ..watcher.policy import PolicyHost, Waypoint, WaypointPolicy
from .scenario import Scenario

logger = get_logger(__name__)

# Section kind -> scenario list field.
LIST_SECTIONS = {
    "switch": "switches",
    "host": "hosts",
    "link": "links",
    "firewall": "firewalls",
    "nids": "nids",
    "rule": "rules",
    "agent": "agents",
    "workload": "workload",
    "waypoint": "waypoints",
}

# The header name fills this key when the body does not set it.
NAME_KEYS = {
    "scenario": "name",
    "switch": "name",
    "host": "name",
    "firewall": "name",
    "nids": "name",
    "rule": "switch",
    "agent": "node",
    "workload": "src",
}

KINDS = ("scenario", "controller", "zone") + tuple(LIST_SECTIONS)

Section = Tuple[str, Optional[str], Dict[str, str], int]


def parse_sections(lines: Iterable[str]) -> List[Section]:
    """Split text into ``(kind, name, body, header_line)`` sections."""
    sections: List[Section] = []
    current: Optional[Section] = None
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"unterminated section header {raw.strip()!r}", number)
            head = line[1:-1].split()
            if not head:
                raise ParseError("empty section header", number)
            if head[0] not in KINDS:
                raise ParseError(f"unknown section kind {head[0]!r}", number)
            if len(head) > 2:
                raise ParseError(f"section header takes at most one name: {raw.strip()!r}", number)
            current = (head[0], head[1] if len(head) == 2 else None, {}, number)
            sections.append(current)
            continue
        if current is None:
            raise ParseError("key=value line outside a section", number)
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ParseError(f"expected key=value, got {raw.strip()!r}", number)
        key = key.strip()
        if key in current[2]:
            raise ParseError(f"duplicate key {key!r}", number)
        current[2][key] = value.strip()
    return sections


def _named(kind: str, name: Optional[str], body: Dict[str, str]) -> Dict[str, Any]:
    data: Dict[str, Any] = dict(body)
    key = NAME_KEYS.get(kind)
    if name is not None:
        if key is None and kind != "zone":
            raise ValueError(f"[{kind}] sections take no name")
        if key is not None:
            data.setdefault(key, name)
    return data


def scenario_from_sections(sections: List[Section]) -> Scenario:
    data: Dict[str, Any] = {}
    for kind, name, body, number in sections:
        try:
            if kind == "scenario":
                if any(k in LIST_SECTIONS.values() or k in ("controller", "zones") for k in body):
                    raise ValueError("[scenario] holds scalar settings only")
                data.update(_named(kind, name, body))
            elif kind == "controller":
                if "controller" in data:
                    raise ValueError("only one [controller] section is allowed")
                data["controller"] = dict(body)
            elif kind == "zone":
                if name is None:
                    raise ValueError("[zone] needs a name")
                data.setdefault("zones", {})[name] = body.get("members", "")
            else:
                data.setdefault(LIST_SECTIONS[kind], []).append(_named(kind, name, body))
        except ValueError as e:
            raise ParseError(str(e), number) from e
    data.setdefault("name", "custom")
    try:
        return Scenario(**data)
    except ValidationError as e:
        raise ParseError(f"invalid scenario: {e}") from e


def parse_scenario(text: str) -> Scenario:
    return scenario_from_sections(parse_sections(text.splitlines()))


def load_scenario(path: Union[str, Path]) -> Scenario:
    logger.info(f"loading scenario file {path}")
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def parse_policy(text: str) -> WaypointPolicy:
    """
    Read a watcher policy: ``[host]`` sections (``mac``, ``switch``,
    ``port``, ``zone``) and ``[waypoint]`` sections. A full scenario file is
    also a valid policy file; its other sections are ignored.
    """
    hosts: List[PolicyHost] = []
    waypoints: List[Waypoint] = []
    zones: Dict[str, List[str]] = {}
    for kind, name, body, number in parse_sections(text.splitlines()):
        try:
            if kind == "host":
                data = _named(kind, name, body)
                hosts.append(PolicyHost(**{k: data[k] for k in ("name", "mac", "switch", "port")}, zone=data.get("zone")))
            elif kind == "zone" and name is not None:
                zones[name] = [m.strip() for m in body.get("members", "").split(",") if m.strip()]
            elif kind == "waypoint":
                waypoints.append(Waypoint(**body))
        except KeyError as e:
            raise ParseError(f"[{kind}] is missing {e.args[0]!r}", number) from e
        except ValueError as e:
            raise ParseError(str(e), number) from e
    if zones:
        hosts = [
            h if h.zone is not None else h.model_copy(update={"zone": _zone_for(h.name, zones)})
            for h in hosts
        ]
    try:
        return WaypointPolicy(hosts=hosts, waypoints=waypoints)
    except ValidationError as e:
        raise ParseError(f"invalid policy: {e}") from e


def _zone_for(host: str, zones: Dict[str, List[str]]) -> Optional[str]:
    for zone, members in sorted(zones.items()):
        if host in members:
            return zone
    return None


def load_policy(path: Union[str, Path]) -> WaypointPolicy:
    logger.info(f"loading policy file {path}")
    return parse_policy(Path(path).read_text(encoding="utf-8"))


# dumping


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _body(model, skip: Tuple[str, ...] = ()) -> List[str]:
    lines = []
    for key, value in model.model_dump(exclude_defaults=True, exclude_none=True).items():
        if key in skip:
            continue
        if key == "rules" and isinstance(value, list):
            value = "; ".join(" ".join(rule) for rule in value)
        lines.append(f"{key}={_fmt(value)}")
    return lines


def dump_scenario(scn: Scenario) -> str:
    """Render ``scn`` in the scenario file syntax; ``parse_scenario`` reads it back."""
    out = [f"[scenario {scn.name}]"]
    scalars = ("description", "family", "seed", "duration", "control_latency", "capacity_bps")
    for key in scalars:
        value = getattr(scn, key)
        if value not in (None, ""):
            out.append(f"{key}={_fmt(value)}")
    controller = _body(scn.controller)
    if controller:
        out += ["", "[controller]"] + controller
    for kind, attr in LIST_SECTIONS.items():
        key = NAME_KEYS.get(kind)
        for item in getattr(scn, attr):
            name = getattr(item, key) if key else None
            header = f"[{kind} {name}]" if name is not None else f"[{kind}]"
            out += ["", header] + _body(item, skip=(key,) if key else ())
    for zone, members in sorted(scn.zones.items()):
        out += ["", f"[zone {zone}]", f"members={_fmt(members)}"]
    return "\n".join(out) + "\n"
