"""Countermeasures: PacketIn/PacketOut correlation, waypoint enforcement and audit."""

from .audit import AuditReport, audit_report
from .policy import Decision, PacketOutContext, PolicyHost, Waypoint, WaypointPolicy, enforce_waypoint, policy_from_scenario
from .watcher import Alert, AlertKind, Watcher
