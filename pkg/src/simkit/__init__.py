"""Deterministic network simulation: scenarios, the event engine and metrics.

Only the scenario model and the catalog are re-exported here: the watcher
imports the scenario model, and ``engine``/``scenario_file`` import the
watcher, so those are imported from their modules directly.
"""

from .scenario import Scenario
from .catalog import CATALOG, EXTRA, CatalogEntry, build_scenario, catalog_entries
