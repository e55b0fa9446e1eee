"""Plain-text message sequence charts of a control trace."""

from typing import Iterable, List, Optional, Sequence

from ..protocol.trace import TraceRecord
from ..utils.durations import format_ms

COLUMN = 14
TIME_WIDTH = 10


def _columns(records: Sequence[TraceRecord]) -> List[str]:
    # Order of first appearance keeps the layout stable for a given trace.
    seen: List[str] = []
    for rec in records:
        for node in (rec.src, rec.dst):
            if node not in seen:
                seen.append(node)
    return seen


def _row(columns: List[str], src: str, dst: str) -> str:
    width = COLUMN * len(columns)
    cells = [" "] * width
    for index in range(len(columns)):
        cells[index * COLUMN + COLUMN // 2] = "|"
    a = columns.index(src) * COLUMN + COLUMN // 2
    b = columns.index(dst) * COLUMN + COLUMN // 2
    lo, hi = sorted((a, b))
    for i in range(lo + 1, hi):
        cells[i] = "-"
    if b > a:
        cells[b - 1] = ">"
    else:
        cells[b + 1] = "<"
    return "".join(cells).rstrip()


def select_records(
    records: Iterable[TraceRecord],
    node: Optional[str] = None,
    kinds: Optional[Sequence[str]] = None,
) -> List[TraceRecord]:
    """Control records, optionally restricted to one node and some message kinds."""
    out = []
    for rec in records:
        if rec.kind != "control":
            continue
        if node is not None and node not in (rec.src, rec.dst):
            continue
        if kinds and rec.parsed.name not in kinds:
            continue
        out.append(rec)
    return out


def render_msc(
    records: Iterable[TraceRecord],
    node: Optional[str] = None,
    kinds: Optional[Sequence[str]] = None,
) -> str:
    """
    Draw one column per node and one arrow per control message.

    Args:
        records: Trace records in trace order
        node: Keep only messages sent or received by this node
        kinds: Keep only these message kinds (e.g. ``PacketIn``)

    Returns:
        The chart; an empty selection yields the header line alone
    """
    chosen = select_records(records, node, kinds)
    columns = _columns(chosen)
    header = "t(ms)".rjust(TIME_WIDTH) + "  " + "".join(name.center(COLUMN) for name in columns)
    lines = [header.rstrip()]
    for rec in chosen:
        parsed = rec.parsed
        label = f"{parsed.name} seq={parsed.seq}"
        lines.append(f"{format_ms(rec.t).rjust(TIME_WIDTH)}  {_row(columns, rec.src, rec.dst)}  {label}")
    return "\n".join(lines) + "\n"
