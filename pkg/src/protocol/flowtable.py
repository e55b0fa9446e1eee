"""Flow-table lookup and action application (single table, one resubmit pass)."""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from ..utils.errors import ResubmitLoop
from .messages import (
    Action,
    Drop,
    FlowRule,
    Frame,
    Output,
    Resubmit,
    SetDlDst,
    ToController,
)


def validate_actions(actions: Sequence[Action]) -> None:
    """Drop stands alone; Resubmit appears at most once."""
    if any(isinstance(a, Drop) for a in actions) and len(actions) > 1:
        raise ValueError("an action list containing Drop must contain nothing else")
    if sum(isinstance(a, Resubmit) for a in actions) > 1:
        raise ValueError("Resubmit may appear at most once per action list")


def match_rule(frame: Frame, in_port: int, table: Sequence[FlowRule]) -> Optional[FlowRule]:
    """
    Highest-priority matching rule; earliest-installed wins ties.

    Args:
        frame: Frame being looked up
        in_port: Ingress port
        table: Flow table (any order)

    Returns:
        The selected rule, or None on a table miss
    """
    best: Optional[FlowRule] = None
    best_rank: Optional[Tuple[int, int]] = None
    for position, rule in enumerate(table):
        if not rule.match.matches(frame, in_port):
            continue
        # Higher priority first, then earlier install, then table position.
        rank = (-rule.priority, rule.install_time, position)
        if best_rank is None or rank < best_rank:
            best, best_rank = rule, rank
    return best


@dataclass
class ActionResult:
    """Effects of one action list on one frame."""
    outputs: List[Tuple[int, Frame]] = field(default_factory=list)
    to_controller: bool = False
    resubmit: bool = False
    frame: Optional[Frame] = None


def apply_actions(frame: Frame, actions: Sequence[Action], resubmitted: bool = False) -> ActionResult:
    """
    Apply an action list in order.

    SetDlDst works on a copy so the input frame stays intact for tracing.
    A Resubmit requested on a frame that is already in its resubmit pass
    raises ResubmitLoop.
    """
    validate_actions(actions)
    result = ActionResult(frame=frame)
    current = frame
    for action in actions:
        if isinstance(action, Drop):
            return ActionResult(frame=current)
        if isinstance(action, SetDlDst):
            current = current.with_dst(action.mac)
        elif isinstance(action, Output):
            result.outputs.append((action.port, current))
        elif isinstance(action, ToController):
            result.to_controller = True
        elif isinstance(action, Resubmit):
            if resubmitted:
                raise ResubmitLoop("second resubmit within one ingress event")
            result.resubmit = True
    result.frame = current
    return result
