"""MCP and HTTP tool surfaces for Teleport Lab."""
