"""
Command-line entry point: ``list``, ``run``, ``detect`` and ``msc``.

Exit codes: 0 on success, 2 when an enforce-mode run withheld controller
messages (the attack was blocked), 1 on an engine failure and 64 on an
invalid configuration, scenario or input file.
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO

from pydantic import BaseModel, Field, field_validator

from ..protocol.trace import TraceRecord, iter_records, read_trace, write_trace
from ..simkit.catalog import build_scenario, catalog_entries
from ..simkit.engine import Simulation
from ..simkit.metrics import format_kv, metrics_summary
from ..simkit.scenario import Duration, Scenario
from ..simkit.scenario_file import load_policy, load_scenario
from ..utils.config import config
from ..utils.errors import TeleportLabError, UnknownScenario
from ..utils.logger import get_logger
from ..watcher.audit import AuditReport, audit_report
from ..watcher.policy import WaypointPolicy, policy_from_scenario
from ..watcher.watcher import Watcher
from .msc import render_msc

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ENGINE = 1
EXIT_BLOCKED = 2
EXIT_USAGE = 64


class WatcherMode(str, Enum):
    OFF = "off"
    OBSERVE = "observe"
    ENFORCE = "enforce"


class RunConfig(BaseModel):
    """
    One scenario run.

    ``scenario`` is a catalog name or the path of a scenario file (anything
    containing ``/`` or ending in ``.scn``). ``out=None`` keeps the results
    in memory.
    """
    scenario: str
    seed: int = Field(default=1, ge=0, lt=2**64)
    duration: Optional[Duration] = None
    out: Optional[Path] = None
    watcher: WatcherMode = WatcherMode.OFF
    overrides: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("duration")
    @classmethod
    def _positive(cls, value):
        if value is not None and value <= 0:
            raise ValueError("duration must be positive")
        return value

    @property
    def is_file(self) -> bool:
        return "/" in self.scenario or self.scenario.endswith(".scn")


@dataclass
class RunOutcome:
    name: str
    exit_code: int
    records: List[TraceRecord] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    report: Optional[AuditReport] = None
    out_dir: Optional[Path] = None
    error: str = ""

    @property
    def status(self) -> str:
        return {EXIT_OK: "ok", EXIT_BLOCKED: "blocked", EXIT_ENGINE: "error", EXIT_USAGE: "invalid"}[self.exit_code]


def catalog_lines(include_extra: bool = False) -> List[str]:
    return [f"{e.name}\t{e.family}\t{e.description}" for e in catalog_entries(include_extra)]


def load_run_scenario(cfg: RunConfig) -> Scenario:
    """Resolve ``cfg`` to a validated scenario with its seed and duration applied."""
    fields: Dict[str, Any] = {"seed": cfg.seed}
    if cfg.duration is not None:
        fields["duration"] = cfg.duration
    if cfg.is_file:
        scn = load_scenario(cfg.scenario)
        for key, value in {**cfg.overrides, **fields}.items():
            setattr(scn, key, value)
        return scn
    return build_scenario(cfg.scenario, **{**cfg.overrides, **fields})


def execute_run(cfg: RunConfig) -> RunOutcome:
    """
    Run one scenario and, when ``cfg.out`` is set, write ``trace.log``,
    ``metrics.kv`` and ``watcher.kv`` (the latter unless the watcher is off).
    """
    try:
        scn = load_run_scenario(cfg)
        watcher = None
        if cfg.watcher is not WatcherMode.OFF:
            watcher = Watcher(policy=policy_from_scenario(scn))
        sim = Simulation(scn, watcher=watcher, enforce=cfg.watcher is WatcherMode.ENFORCE)
    except (UnknownScenario, ValueError, OSError) as e:
        logger.error(f"invalid run configuration for {cfg.scenario}: {e}")
        return RunOutcome(cfg.scenario, EXIT_USAGE, error=str(e))

    try:
        records, metrics = sim.run()
    except Exception as e:
        logger.error(f"engine failure in {scn.name}: {e}", exc_info=True)
        return RunOutcome(scn.name, EXIT_ENGINE, records=list(sim.records), error=str(e))

    outcome = RunOutcome(
        name=scn.name,
        exit_code=EXIT_BLOCKED if sim.enforce and metrics.withheld else EXIT_OK,
        records=records,
        summary=metrics_summary(metrics),
        report=audit_report(watcher.alerts) if watcher is not None else None,
    )
    if cfg.out is not None:
        try:
            outcome.out_dir = write_outputs(outcome, cfg.out)
        except OSError as e:
            logger.error(f"cannot write results to {cfg.out}: {e}")
            outcome.exit_code, outcome.error = EXIT_USAGE, str(e)
    return outcome


def write_outputs(outcome: RunOutcome, out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    write_trace(outcome.records, out / "trace.log")
    (out / "metrics.kv").write_text(format_kv(outcome.summary), encoding="utf-8")
    if outcome.report is not None:
        (out / "watcher.kv").write_text(outcome.report.render(), encoding="utf-8")
    logger.info(f"wrote {outcome.name} results to {out}")
    return out


def run_many(configs: Sequence[RunConfig], jobs: int = 1) -> List[RunOutcome]:
    """Run independent scenarios, in a thread pool when ``jobs > 1``; results keep input order."""
    if jobs <= 1 or len(configs) <= 1:
        return [execute_run(cfg) for cfg in configs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(execute_run, configs))


def combined_exit(codes: Sequence[int]) -> int:
    for code in (EXIT_USAGE, EXIT_ENGINE, EXIT_BLOCKED):
        if code in codes:
            return code
    return EXIT_OK


def detect_records(
    records: Sequence[TraceRecord],
    policy: Optional[WaypointPolicy] = None,
    strict_mobility: bool = False,
) -> AuditReport:
    """Replay a trace through a fresh watcher and build the audit report."""
    watcher = Watcher(policy=policy, strict_mobility=strict_mobility)
    watcher.observe_all(records)
    return audit_report(watcher.alerts)


def detect_text(trace_text: str, policy: Optional[WaypointPolicy] = None) -> AuditReport:
    return detect_records(list(iter_records(trace_text.splitlines())), policy)


# argument handling


def parse_override(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    lowered = value.lower()
    if lowered in ("true", "false"):
        return key, lowered == "true"
    try:
        return key, int(value, 0)
    except ValueError:
        pass
    try:
        return key, float(value)
    except ValueError:
        return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teleport-lab", description="Control-plane teleportation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_list = sub.add_parser("list", help="list catalog scenarios")
    p_list.add_argument("--all", action="store_true", help="include the benign baseline")

    p_run = sub.add_parser("run", help="run one or more scenarios")
    p_run.add_argument("names", nargs="+", help="catalog names or scenario files")
    p_run.add_argument("--seed", type=int, default=1)
    p_run.add_argument("--duration", default=None, help="sim time, e.g. 500ms or 2s")
    p_run.add_argument("--out", default=config.output_dir, help="output directory")
    p_run.add_argument("--watcher", choices=[m.value for m in WatcherMode], default=WatcherMode.OFF.value)
    p_run.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel")
    p_run.add_argument("--set", dest="overrides", action="append", type=parse_override, default=[],
                       metavar="KEY=VALUE", help="builder knob or scenario field")

    p_detect = sub.add_parser("detect", help="run the watcher over a trace file")
    p_detect.add_argument("--trace", required=True)
    p_detect.add_argument("--policy", default=None, help="policy or scenario file")
    p_detect.add_argument("--enforce", action="store_true", help="exit 2 when any verdict is Deny")
    p_detect.add_argument("--strict-mobility", action="store_true")

    p_msc = sub.add_parser("msc", help="render a message sequence chart")
    p_msc.add_argument("--trace", required=True)
    p_msc.add_argument("--node", default=None)
    p_msc.add_argument("--kind", action="append", default=[], help="message kind, repeatable")
    return parser


def cmd_list(args, stdout: TextIO) -> int:
    for line in catalog_lines(args.all):
        stdout.write(line + "\n")
    return EXIT_OK


def cmd_run(args, stdout: TextIO) -> int:
    try:
        base = Path(args.out)
        configs = [
            RunConfig(
                scenario=name,
                seed=args.seed,
                duration=args.duration,
                out=base if len(args.names) == 1 else base / Path(name).stem,
                watcher=args.watcher,
                overrides=dict(args.overrides),
            )
            for name in args.names
        ]
    except ValueError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    outcomes = run_many(configs, args.jobs)
    for outcome in outcomes:
        where = outcome.out_dir if outcome.out_dir is not None else "-"
        stdout.write(f"{outcome.name}\t{outcome.status}\t{where}\n")
        if outcome.error:
            sys.stderr.write(f"error: {outcome.name}: {outcome.error}\n")
    return combined_exit([o.exit_code for o in outcomes])


def cmd_detect(args, stdout: TextIO) -> int:
    try:
        records = read_trace(args.trace)
        policy = load_policy(args.policy) if args.policy else None
        report = detect_records(records, policy, args.strict_mobility)
    except (TeleportLabError, ValueError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    stdout.write(report.render())
    return EXIT_BLOCKED if args.enforce and report.denied else EXIT_OK


def cmd_msc(args, stdout: TextIO) -> int:
    try:
        records = read_trace(args.trace)
    except (TeleportLabError, ValueError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE
    stdout.write(render_msc(records, node=args.node, kinds=args.kind or None))
    return EXIT_OK


COMMANDS = {"list": cmd_list, "run": cmd_run, "detect": cmd_detect, "msc": cmd_msc}


def main(argv: Optional[Sequence[str]] = None, stdout: Optional[TextIO] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    return COMMANDS[args.command](args, stdout or sys.stdout)
