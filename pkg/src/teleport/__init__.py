"""Teleportation techniques: secret matrices, agents and channel arithmetic."""

from .agents import (
    OobReceiver,
    OobSender,
    PathResetReceiver,
    PathResetSender,
    PathUpdateAgent,
    SwitchIdAgent,
)
from .capacity import ChannelStats, OobCapacity, oob_capacity
from .channels import (
    CHUNK_HEADER,
    AgentState,
    Denied,
    PathResetAction,
    PuReaction,
    Replaced,
    ResetMode,
    RoleAssigned,
    SlotEvent,
    Technique,
    oob_receive,
    oob_send,
    pr_decode_slot,
    pr_send_bit,
    pu_on_flow_delete,
    pu_start,
    si_claims,
    si_rendezvous_step,
)
from .secrets import SecretMatrix, secret_dpid, secret_mac
