"""Switch, host and middlebox state machines."""

from .effects import Delivered, Effect, EmitFrame, OpenConnection, SendControl, StartTimer, TraceNote
from .host import HOST_PORT, HostApp, HostCapabilities, HostState, host_receive, host_send
from .middlebox import FirewallRule, FirewallState, NidsState, Verdict, firewall_filter, nids_inspect
from .switch import (
    ConnectionState,
    ConnState,
    SwitchAgent,
    SwitchCapabilities,
    SwitchState,
    connect,
    expire_idle,
    install_rule,
    local_delete,
    local_install,
    switch_handle_control,
    switch_ingress,
)
