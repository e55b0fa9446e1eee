"""Operator entry point."""

from .commands import RunConfig, RunOutcome, WatcherMode, execute_run, main
from .msc import render_msc
