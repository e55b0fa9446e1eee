"""Teleport Lab - control-plane teleportation simulator."""

__version__ = "0.1.0"
