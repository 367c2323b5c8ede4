"""Exception hierarchy. UserError maps to CLI exit code 1, everything else to 2."""

from __future__ import annotations


class LandmarkPipeError(Exception):
    """Base class for all package errors."""


class UserError(LandmarkPipeError):
    """Bad input: unreadable files, invalid config, violated preconditions."""


class ParseError(UserError):
    """Input file failed to parse; carries the offending line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GatewayError(LandmarkPipeError):
    """LLM endpoint failure that survived the retry policy."""


class ReplayMissError(GatewayError):
    """Replay-only mode had no transcript for the request hash."""


class ClusterError(UserError):
    """Clustering preconditions violated or fit degenerated irrecoverably."""
