"""Switch admission: what the controller does when two switches claim one DPID."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from ..protocol.messages import ControlMessage, Disconnect, Role, RoleRequest
from ..utils.errors import InvalidDpid


class AdmissionPolicy(str, Enum):
    DENY_SECOND = "DenySecond"
    REPLACE_FIRST = "ReplaceFirst"
    COEXIST_ROLES = "CoexistRoles"


class Outcome(str, Enum):
    ACCEPT = "Accept"
    DENY = "Deny"
    REPLACE_AND_ACCEPT = "ReplaceAndAccept"


@dataclass(frozen=True)
class AdmissionDecision:
    outcome: Outcome
    role: Optional[Role] = None
    displaced: Optional[int] = None


@dataclass
class Holding:
    conn_id: int
    frontend: str
    role: Role


@dataclass
class AdmissionTable:
    """Shared by every controller frontend of a cluster."""
    holders: Dict[int, List[Holding]] = field(default_factory=dict)
    conn_dpid: Dict[int, int] = field(default_factory=dict)

    def dpid_of(self, conn_id: int) -> Optional[int]:
        return self.conn_dpid.get(conn_id)

    def master_conn(self, dpid: int) -> Optional[int]:
        for holding in self.holders.get(dpid, []):
            if holding.role is Role.MASTER:
                return holding.conn_id
        return None

    def release(self, conn_id: int) -> Optional[int]:
        dpid = self.conn_dpid.pop(conn_id, None)
        if dpid is None:
            return None
        remaining = [h for h in self.holders.get(dpid, []) if h.conn_id != conn_id]
        if remaining:
            self.holders[dpid] = remaining
        else:
            self.holders.pop(dpid, None)
        return dpid

    def _hold(self, dpid: int, conn_id: int, frontend: str, role: Role) -> None:
        self.holders.setdefault(dpid, []).append(Holding(conn_id, frontend, role))
        self.conn_dpid[conn_id] = dpid


def admit_switch(
    table: AdmissionTable,
    conn_id: int,
    frontend: str,
    claimed: int,
    policy: AdmissionPolicy,
) -> Tuple[AdmissionDecision, List[Tuple[int, ControlMessage]]]:
    """
    Decide on a FeaturesReply claiming ``claimed``.

    Returns:
        The decision and the (connection, message) pairs it produces
    """
    if claimed <= 0:
        raise InvalidDpid(f"datapath id must be positive, got {claimed}")

    current = table.holders.get(claimed, [])
    if not current:
        table._hold(claimed, conn_id, frontend, Role.MASTER)
        return AdmissionDecision(Outcome.ACCEPT, Role.MASTER), [(conn_id, RoleRequest(Role.MASTER))]

    if policy is AdmissionPolicy.DENY_SECOND:
        return AdmissionDecision(Outcome.DENY), [(conn_id, Disconnect("dpid-in-use"))]

    if policy is AdmissionPolicy.REPLACE_FIRST:
        displaced = current[0].conn_id
        table.release(displaced)
        table._hold(claimed, conn_id, frontend, Role.MASTER)
        return (
            AdmissionDecision(Outcome.REPLACE_AND_ACCEPT, Role.MASTER, displaced=displaced),
            [(displaced, Disconnect("replaced")), (conn_id, RoleRequest(Role.MASTER))],
        )

    table._hold(claimed, conn_id, frontend, Role.EQUAL)
    return AdmissionDecision(Outcome.ACCEPT, Role.EQUAL), [(conn_id, RoleRequest(Role.EQUAL))]
