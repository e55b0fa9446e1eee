"""
Trace records: the line format shared by the simulator output and the
offline watcher.

A record line is ``t<TAB>src<TAB>dst<TAB>kind<TAB>wire_bytes<TAB>msg``.
``msg`` is a compact ``Kind key=value ...`` rendering whose first two keys
are always ``seq`` and ``cause``.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union
from urllib.parse import quote, unquote

from ..utils.errors import ParseError
from .messages import (
    Action,
    ControlMessage,
    Disconnect,
    Drop,
    FeaturesReply,
    FlowMod,
    FlowRemoved,
    Frame,
    FrameSummary,
    MacAddr,
    MatchFields,
    Output,
    PacketIn,
    PacketOut,
    Resubmit,
    RoleReply,
    RoleRequest,
    SetDlDst,
    ToController,
    message_kind,
)

KINDS = ("control", "data", "note")
NO_CAUSE = -1


@dataclass(frozen=True)
class TraceRecord:
    t: int
    src: str
    dst: str
    kind: str
    msg: str
    wire_bytes: int = 0

    @property
    def parsed(self) -> "ParsedMsg":
        return parse_msg(self.msg)


@dataclass(frozen=True)
class ParsedMsg:
    name: str
    seq: int
    cause: int
    fields: Dict[str, str]

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.fields.get(key, default)


def encode_record(rec: TraceRecord) -> str:
    """Render one record as a single tab-separated line (no newline)."""
    if rec.kind not in KINDS:
        raise ValueError(f"unknown record kind: {rec.kind!r}")
    for name, value in (("src", rec.src), ("dst", rec.dst), ("msg", rec.msg)):
        if "\t" in value or "\n" in value or "\r" in value:
            raise ValueError(f"record {name} may not contain tabs or newlines")
    if rec.t < 0 or rec.wire_bytes < 0:
        raise ValueError("record time and wire_bytes must be non-negative")
    return "\t".join((str(rec.t), rec.src, rec.dst, rec.kind, str(rec.wire_bytes), rec.msg))


def decode_record(line: str, line_number: Optional[int] = None) -> TraceRecord:
    """Parse a line produced by encode_record."""
    parts = line.rstrip("\r\n").split("\t")
    if len(parts) != 6:
        raise ParseError(f"expected 6 tab-separated fields, got {len(parts)}", line_number)
    t_text, src, dst, kind, wire_text, msg = parts
    if kind not in KINDS:
        raise ParseError(f"unknown record kind {kind!r}", line_number)
    try:
        t = int(t_text)
        wire = int(wire_text)
    except ValueError as e:
        raise ParseError(f"non-integer time or wire_bytes: {e}", line_number) from e
    if t < 0 or wire < 0:
        raise ParseError("negative time or wire_bytes", line_number)
    return TraceRecord(t=t, src=src, dst=dst, kind=kind, msg=msg, wire_bytes=wire)


def write_trace(records: Iterable[TraceRecord], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for rec in records:
            f.write(encode_record(rec))
            f.write("\n")


def read_trace(path: Union[str, Path]) -> List[TraceRecord]:
    with open(path, "r", encoding="utf-8") as f:
        return list(iter_records(f))


def iter_records(lines: Iterable[str]) -> Iterator[TraceRecord]:
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        yield decode_record(line, number)


# msg rendering


def _fmt_opt(value) -> str:
    return "-" if value is None else str(value)


def _fmt_flags(flags) -> str:
    return "+".join(sorted(flags)) if flags else "-"


def _fmt_actions(actions: Tuple[Action, ...]) -> str:
    out = []
    for action in actions:
        if isinstance(action, Output):
            out.append(f"output:{action.port}")
        elif isinstance(action, SetDlDst):
            out.append(f"mod_dl_dst:{action.mac}")
        elif isinstance(action, Resubmit):
            out.append("resubmit")
        elif isinstance(action, Drop):
            out.append("drop")
        elif isinstance(action, ToController):
            out.append("controller")
    return ",".join(out) if out else "drop"


def _frame_fields(frame: Frame) -> List[str]:
    return [
        f"src={frame.src}",
        f"dst={frame.dst}",
        f"type=0x{frame.ethertype:04x}",
        f"proto={_fmt_opt(frame.tp_proto)}",
        f"sport={_fmt_opt(frame.tp_src)}",
        f"dport={_fmt_opt(frame.tp_dst)}",
        f"flags={_fmt_flags(frame.tcp_flags)}",
        f"len={len(frame.payload)}",
        f"digest={frame.digest}",
    ]


def _match_fields(match: MatchFields) -> List[str]:
    out = []
    if match.in_port is not None:
        out.append(f"m_in_port={match.in_port}")
    if match.dl_src is not None:
        out.append(f"m_dl_src={match.dl_src}")
    if match.dl_dst is not None:
        out.append(f"m_dl_dst={match.dl_dst}")
    if match.ethertype is not None:
        out.append(f"m_type=0x{match.ethertype:04x}")
    if match.tp_src is not None:
        out.append(f"m_sport={match.tp_src}")
    if match.tp_dst is not None:
        out.append(f"m_dport={match.tp_dst}")
    if match.tcp_flags is not None:
        out.append(f"m_flags={_fmt_flags(match.tcp_flags)}")
    return out


def _head(name: str, seq: int, cause: int) -> List[str]:
    return [name, f"seq={seq}", f"cause={'-' if cause == NO_CAUSE else cause}"]


def render_message(msg: ControlMessage, seq: int, cause: int = NO_CAUSE) -> str:
    parts = _head(message_kind(msg), seq, cause)
    if isinstance(msg, FeaturesReply):
        parts.append(f"dpid={msg.dpid}")
    elif isinstance(msg, PacketIn):
        parts += [f"in_port={msg.in_port}", f"reason={msg.reason.value}"]
        parts += _frame_fields(msg.frame)
    elif isinstance(msg, PacketOut):
        parts.append(f"actions={_fmt_actions(msg.actions)}")
        parts += _frame_fields(msg.frame)
    elif isinstance(msg, FlowMod):
        rule = msg.rule
        parts += [f"cookie={rule.cookie}", f"priority={rule.priority}", f"idle={_fmt_opt(rule.idle_timeout)}"]
        parts += _match_fields(rule.match)
        parts.append(f"actions={_fmt_actions(rule.actions)}")
    elif isinstance(msg, FlowRemoved):
        parts += [f"cookie={msg.cookie}", f"priority={msg.priority}", f"reason={msg.reason.value}"]
        parts += _match_fields(msg.match)
    elif isinstance(msg, (RoleRequest, RoleReply)):
        parts.append(f"role={msg.role.value}")
    elif isinstance(msg, Disconnect):
        parts.append(f"reason={quote(msg.reason, safe='')}")
    return " ".join(parts)


def render_frame(frame: Frame, seq: int, cause: int, out_port: Optional[int] = None, in_port: Optional[int] = None) -> str:
    parts = _head("Frame", seq, cause)
    parts += [f"out_port={_fmt_opt(out_port)}", f"in_port={_fmt_opt(in_port)}"]
    parts += _frame_fields(frame)
    return " ".join(parts)


def render_note(text: str, seq: int, cause: int = NO_CAUSE) -> str:
    return " ".join(_head("Note", seq, cause) + [f"text={quote(text, safe='')}"])


# msg parsing


def parse_msg(msg: str) -> ParsedMsg:
    tokens = msg.split(" ")
    if not tokens or not tokens[0]:
        raise ParseError("empty message text")
    fields: Dict[str, str] = {}
    for token in tokens[1:]:
        key, sep, value = token.partition("=")
        if not sep:
            raise ParseError(f"malformed field {token!r}")
        fields[key] = value
    try:
        seq = int(fields.pop("seq"))
        cause_text = fields.pop("cause")
    except (KeyError, ValueError) as e:
        raise ParseError(f"message lacks seq/cause: {msg!r}") from e
    cause = NO_CAUSE if cause_text == "-" else int(cause_text)
    return ParsedMsg(name=tokens[0], seq=seq, cause=cause, fields=fields)


def _opt_int(text: Optional[str]) -> Optional[int]:
    return None if text in (None, "-") else int(text, 0)


def _flags(text: Optional[str]):
    return frozenset() if text in (None, "-", "") else frozenset(text.split("+"))


def frame_summary(parsed: ParsedMsg) -> FrameSummary:
    f = parsed.fields
    return FrameSummary(
        src=MacAddr.parse(f["src"]),
        dst=MacAddr.parse(f["dst"]),
        ethertype=int(f["type"], 16),
        tp_proto=None if f.get("proto", "-") == "-" else f["proto"],
        tp_src=_opt_int(f.get("sport")),
        tp_dst=_opt_int(f.get("dport")),
        tcp_flags=_flags(f.get("flags")),
        length=int(f.get("len", "0")),
        digest=f.get("digest", ""),
    )


def match_from_fields(parsed: ParsedMsg) -> MatchFields:
    f = parsed.fields
    return MatchFields(
        in_port=_opt_int(f.get("m_in_port")),
        dl_src=MacAddr.parse(f["m_dl_src"]) if "m_dl_src" in f else None,
        dl_dst=MacAddr.parse(f["m_dl_dst"]) if "m_dl_dst" in f else None,
        ethertype=int(f["m_type"], 16) if "m_type" in f else None,
        tp_src=_opt_int(f.get("m_sport")),
        tp_dst=_opt_int(f.get("m_dport")),
        tcp_flags=_flags(f["m_flags"]) if "m_flags" in f else None,
    )


def output_ports(parsed: ParsedMsg) -> List[int]:
    ports = []
    for item in (parsed.get("actions") or "").split(","):
        if item.startswith("output:"):
            ports.append(int(item.split(":", 1)[1]))
    return ports


def note_text(parsed: ParsedMsg) -> str:
    return unquote(parsed.get("text", ""))
