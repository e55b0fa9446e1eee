"""Trusted controller: admission, host tracking and pave-path intents."""

from .admission import AdmissionDecision, AdmissionPolicy, AdmissionTable, Outcome, admit_switch
from .controller import (
    Cluster,
    Command,
    Controller,
    ControllerSettings,
    HostLocation,
    IntentRecord,
    IntentState,
    Note,
    intent_key,
    on_flow_removed,
    on_packet_in,
    update_host_location,
)
from .topology import Topology, compute_path
