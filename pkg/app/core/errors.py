"""Exception hierarchy shared by the simulators, the CLI and the HTTP surface.

Every error carries a machine-readable ``category`` and the CLI exit code for it.
"""
from typing import Any, Dict


class KickedRotorError(Exception):
    category = "internal"
    exit_code = 1

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.category, "message": str(self)}


class ParameterError(KickedRotorError, ValueError):
    """A physical or numerical parameter is outside its domain."""

    category = "invalid-parameter"
    exit_code = 2


class LadderSizeError(ParameterError):
    """The momentum ladder cannot hold the requested evolution."""

    category = "ladder-size"


class ConfigError(KickedRotorError):
    """A scan configuration is malformed or inconsistent."""

    category = "invalid-config"
    exit_code = 3


class AnalysisError(KickedRotorError):
    """Peak finding, width or fit could not produce a result from the data."""

    category = "analysis"
    exit_code = 4


class OutputError(KickedRotorError):
    category = "io"
    exit_code = 5

    def __init__(self, path, reason: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")
