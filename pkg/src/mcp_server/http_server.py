"""
HTTP wrapper around the simulator and the watcher.
Exposes REST API endpoints mirroring the MCP tools.
"""

from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from ..cli.commands import WatcherMode, catalog_lines
from ..cli.msc import render_msc
from ..protocol.trace import iter_records
from ..simkit.catalog import CATALOG, EXTRA
from ..utils.config import config
from ..utils.errors import ParseError
from ..utils.logger import get_logger
from .server import detect_trace_tool, run_scenario_tool

logger = get_logger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title="Teleport Lab API",
    description="REST API for control-plane teleportation scenarios and the PacketIn/PacketOut watcher",
    version=config.mcp_server_version
)


# Request models
class RunRequest(BaseModel):
    scenario: str
    seed: int = Field(default=1, ge=0)
    duration: Optional[str] = None
    watcher: WatcherMode = WatcherMode.OBSERVE
    overrides: Dict[str, Any] = Field(default_factory=dict)
    include_trace: bool = False


class DetectRequest(BaseModel):
    trace: str
    policy: Optional[str] = None


class MscRequest(BaseModel):
    trace: str
    node: Optional[str] = None
    kinds: Optional[List[str]] = None


# Health check endpoint
@app.get("/")
@app.get("/health")
async def health_check():
    """Health check endpoint."""
    return {
        "status": "healthy",
        "service": config.mcp_server_name,
        "version": config.mcp_server_version
    }


@app.get("/api/scenarios")
async def list_scenarios(include_baseline: bool = False):
    """List the scenario catalog."""
    lines = catalog_lines(include_baseline)
    data = [dict(zip(("name", "family", "description"), line.split("\t"))) for line in lines]
    return {"success": True, "data": data}


@app.post("/api/run")
def run_scenario(request: RunRequest):
    """Run a catalog scenario (sync endpoint, FastAPI runs it in a worker thread)."""
    if request.scenario not in CATALOG and request.scenario not in EXTRA:
        raise HTTPException(status_code=404, detail=f"unknown scenario {request.scenario}")
    logger.info(f"Running scenario {request.scenario} (seed {request.seed}, watcher {request.watcher.value})")
    try:
        arguments = request.model_dump(exclude_none=True)
        arguments["watcher"] = request.watcher.value
        result = run_scenario_tool(arguments)
    except Exception as e:
        logger.error(f"Error running scenario: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
    return {"success": result["status"] in ("ok", "blocked"), "data": result}


@app.post("/api/detect")
def detect_trace(request: DetectRequest):
    """Replay a trace through the watcher."""
    try:
        logger.info(f"Detecting over {len(request.trace)} trace bytes")
        result = detect_trace_tool(request.model_dump(exclude_none=True))
        return {"success": True, "data": result}
    except ParseError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error in detection: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/api/msc")
async def message_sequence_chart(request: MscRequest):
    """Render a message sequence chart."""
    try:
        records = list(iter_records(request.trace.splitlines()))
        chart = render_msc(records, node=request.node, kinds=request.kinds)
        return {"success": True, "data": {"chart": chart}}
    except ParseError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error rendering chart: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))


# API documentation
@app.get("/api/tools")
async def list_tools():
    """List all available tools and their descriptions."""
    return {
        "tools": [
            {
                "name": "list_scenarios",
                "category": "catalog",
                "description": "List catalog scenarios",
                "endpoint": "/api/scenarios"
            },
            {
                "name": "run_scenario",
                "category": "simulation",
                "description": "Run a scenario and report metrics and alerts",
                "endpoint": "/api/run"
            },
            {
                "name": "detect_trace",
                "category": "watcher",
                "description": "Audit a trace with the PacketIn/PacketOut watcher",
                "endpoint": "/api/detect"
            },
            {
                "name": "render_msc",
                "category": "watcher",
                "description": "Message sequence chart of a trace",
                "endpoint": "/api/msc"
            }
        ]
    }


def main():
    import uvicorn
    config.validate()
    uvicorn.run(app, host=config.http_host, port=config.http_port)


if __name__ == "__main__":
    main()
