"""Configuration management for Teleport Lab."""

import os
from dataclasses import dataclass


@dataclass
class Config:
    """Application configuration."""
    
    # Application Configuration
    log_level: str = os.getenv("LOG_LEVEL", "INFO")
    
    # Simulation Configuration
    event_limit: int = int(os.getenv("TELEPORT_EVENT_LIMIT", "2000000"))
    output_dir: str = os.getenv("TELEPORT_OUTPUT_DIR", "./runs")
    
    # HTTP Server Configuration
    http_host: str = os.getenv("TELEPORT_HTTP_HOST", "0.0.0.0")
    http_port: int = int(os.getenv("TELEPORT_HTTP_PORT", "8080"))
    
    # MCP Server Configuration
    mcp_server_name: str = "teleport-lab"
    mcp_server_version: str = "0.1.0"
    
    def validate(self) -> bool:
        """Validate configuration."""
        if self.event_limit <= 0:
            raise ValueError("TELEPORT_EVENT_LIMIT must be positive")
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"Unsupported LOG_LEVEL: {self.log_level}")
        
        return True


# Global config instance
config = Config()
