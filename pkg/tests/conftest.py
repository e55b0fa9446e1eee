"""Test configuration."""

import pytest

from src.simkit.catalog import build_scenario
from src.simkit.engine import Simulation


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "integration: mark test as an end-to-end scenario run"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow running"
    )


@pytest.fixture
def run_catalog():
    """Build and run a catalog scenario; returns the finished Simulation."""
    def _run(name, watcher=None, enforce=False, **overrides):
        sim = Simulation(build_scenario(name, **overrides), watcher=watcher, enforce=enforce)
        sim.run()
        return sim
    return _run
