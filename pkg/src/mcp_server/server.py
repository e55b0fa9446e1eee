"""
MCP Server Wrapper
Exposes the scenario catalog, simulation runs, the offline watcher and
message sequence charts over the MCP protocol.
"""

import asyncio
import json
from dataclasses import dataclass
from functools import wraps
from typing import Any, Dict, Optional

from mcp.server import Server
from mcp.server.stdio import stdio_server
from mcp.types import TextContent, Tool

from ..cli.commands import RunConfig, catalog_lines, detect_text, execute_run
from ..cli.msc import render_msc
from ..protocol.trace import encode_record, iter_records
from ..simkit.scenario_file import parse_policy
from ..utils.config import config
from ..utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class MCPWrapperConfig:
    """Configuration for MCP wrapper decorators."""
    is_long_running: bool
    timeout: Optional[int] = None  # seconds


def mcp_wrapper(wrapper_config: MCPWrapperConfig):
    """
    Decorator to wrap tool implementations for MCP exposure.

    Args:
        wrapper_config: MCPWrapperConfig with is_long_running flag and other options
    """
    def decorator(func):
        @wraps(func)
        async def async_wrapper(*args, **kwargs):
            if wrapper_config.is_long_running:
                # Simulations block; keep the stdio loop responsive
                loop = asyncio.get_running_loop()
                call = loop.run_in_executor(None, lambda: func(*args, **kwargs))
                if wrapper_config.timeout is not None:
                    return await asyncio.wait_for(call, wrapper_config.timeout)
                return await call
            return func(*args, **kwargs)

        async_wrapper._mcp_config = wrapper_config
        async_wrapper._original_func = func
        return async_wrapper
    return decorator


TOOLS = [
    Tool(
        name="list_scenarios",
        description="List the attack scenario catalog (name, family, description). Fast synchronous operation.",
        inputSchema={
            "type": "object",
            "properties": {
                "include_baseline": {
                    "type": "boolean",
                    "description": "Also list the benign baseline scenario",
                    "default": False
                }
            }
        }
    ),
    Tool(
        name="run_scenario",
        description="Run a catalog scenario and return its metrics and watcher report. Slow operation, runs in a worker thread.",
        inputSchema={
            "type": "object",
            "properties": {
                "scenario": {"type": "string", "description": "Catalog scenario name"},
                "seed": {"type": "integer", "default": 1},
                "duration": {"type": "string", "description": "Sim time such as 500ms (optional)"},
                "watcher": {"type": "string", "enum": ["off", "observe", "enforce"], "default": "observe"},
                "overrides": {"type": "object", "description": "Builder knobs such as m or policy"},
                "include_trace": {"type": "boolean", "default": False}
            },
            "required": ["scenario"]
        }
    ),
    Tool(
        name="detect_trace",
        description="Replay a trace through the PacketIn/PacketOut watcher and return the audit report.",
        inputSchema={
            "type": "object",
            "properties": {
                "trace": {"type": "string", "description": "Trace file contents"},
                "policy": {"type": "string", "description": "Policy file contents (optional)"}
            },
            "required": ["trace"]
        }
    ),
    Tool(
        name="render_msc",
        description="Render a text message sequence chart of a trace. Fast synchronous operation.",
        inputSchema={
            "type": "object",
            "properties": {
                "trace": {"type": "string", "description": "Trace file contents"},
                "node": {"type": "string", "description": "Only messages to or from this node"},
                "kinds": {"type": "array", "items": {"type": "string"}}
            },
            "required": ["trace"]
        }
    ),
]


def run_scenario_tool(arguments: Dict[str, Any]) -> Dict[str, Any]:
    cfg = RunConfig(
        scenario=arguments["scenario"],
        seed=arguments.get("seed", 1),
        duration=arguments.get("duration"),
        watcher=arguments.get("watcher", "observe"),
        overrides=arguments.get("overrides") or {},
    )
    if cfg.is_file:
        raise ValueError("only catalog scenarios can be run remotely")
    outcome = execute_run(cfg)
    result: Dict[str, Any] = {
        "scenario": outcome.name,
        "exit_code": outcome.exit_code,
        "status": outcome.status,
        "metrics": outcome.summary,
    }
    if outcome.error:
        result["error"] = outcome.error
    if outcome.report is not None:
        result["watcher"] = outcome.report.to_lines()
    if arguments.get("include_trace"):
        result["trace"] = "".join(encode_record(r) + "\n" for r in outcome.records)
    return result


def detect_trace_tool(arguments: Dict[str, Any]) -> Dict[str, Any]:
    policy = parse_policy(arguments["policy"]) if arguments.get("policy") else None
    report = detect_text(arguments["trace"], policy)
    return {"alerts": len(report.alerts), "denied": report.denied, "report": report.to_lines()}


class TeleportLabServer:
    """MCP Server exposing the simulator and the watcher."""

    def __init__(self):
        self.server = Server(config.mcp_server_name)
        self._register_tools()
        self._register_handlers()

    def _register_tools(self):
        @self.server.list_tools()
        async def list_tools() -> list[Tool]:
            return TOOLS

    def _register_handlers(self):
        @self.server.call_tool()
        async def call_tool(name: str, arguments: Any) -> list[TextContent]:
            try:
                result = await self._execute_tool(name, arguments or {})
                return [TextContent(type="text", text=json.dumps(result, indent=2))]
            except Exception as e:
                logger.error(f"tool {name} failed: {e}", exc_info=True)
                return [TextContent(type="text", text=json.dumps({"error": str(e)}, indent=2))]

    async def _execute_tool(self, name: str, arguments: Dict[str, Any]) -> Any:
        """Execute a tool based on its name."""
        if name in ("list_scenarios", "render_msc"):
            return await self._execute_fast_tool(name, arguments)
        elif name in ("run_scenario", "detect_trace"):
            return await self._execute_slow_tool(name, arguments)
        else:
            raise ValueError(f"Unknown tool: {name}")

    @mcp_wrapper(MCPWrapperConfig(is_long_running=False))
    def _execute_fast_tool(self, name: str, arguments: Dict[str, Any]) -> Any:
        if name == "list_scenarios":
            lines = catalog_lines(bool(arguments.get("include_baseline")))
            return [dict(zip(("name", "family", "description"), line.split("\t"))) for line in lines]
        if "trace" not in arguments:
            raise ValueError("trace is required")
        records = list(iter_records(arguments["trace"].splitlines()))
        return {"chart": render_msc(records, node=arguments.get("node"), kinds=arguments.get("kinds"))}

    @mcp_wrapper(MCPWrapperConfig(is_long_running=True))
    def _execute_slow_tool(self, name: str, arguments: Dict[str, Any]) -> Any:
        if name == "run_scenario":
            if not arguments.get("scenario"):
                raise ValueError("scenario is required")
            return run_scenario_tool(arguments)
        if "trace" not in arguments:
            raise ValueError("trace is required")
        return detect_trace_tool(arguments)

    async def run(self):
        """Run the MCP server."""
        logger.info(f"starting MCP server {config.mcp_server_name} {config.mcp_server_version}")
        async with stdio_server() as (read_stream, write_stream):
            await self.server.run(
                read_stream,
                write_stream,
                self.server.create_initialization_options()
            )


async def main():
    """Main entry point."""
    server = TeleportLabServer()
    await server.run()


if __name__ == "__main__":
    asyncio.run(main())
