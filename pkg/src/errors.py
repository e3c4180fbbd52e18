"""Exception types shared across the simulator."""
from pathlib import Path
from typing import Optional


class SimulatorError(Exception):
    """Base class for all simulator errors."""


class ConfigError(SimulatorError, ValueError):
    """Invalid experiment configuration."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class SelfReferenceError(SimulatorError, ValueError):
    """A node was asked for its bucket relative to itself."""

    def __init__(self):
        super().__init__("self-reference: bucket index of a zero distance")


class SelfConnectionError(SimulatorError, ValueError):
    """A node tried to connect to itself."""

    def __init__(self, node_id: int):
        self.node_id = node_id
        super().__init__(f"self-connection: {node_id:064x}")


class SchedulingError(SimulatorError, ValueError):
    """An event was scheduled before the current virtual time."""

    def __init__(self, at_us: int, now_us: int):
        self.at_us = at_us
        self.now_us = now_us
        super().__init__(f"cannot schedule at {at_us} us, clock is already at {now_us} us")


class UnknownNodeError(SimulatorError, KeyError):
    """A node id is not part of the simulated population."""

    def __init__(self, node_id: int):
        self.node_id = node_id
        super().__init__(f"node {node_id:064x} is not in the population")

    def __str__(self) -> str:
        return self.args[0]


class ExportError(SimulatorError, OSError):
    """Writing or reading a result file failed."""

    def __init__(self, path: Path, cause: Optional[BaseException] = None):
        self.path = Path(path)
        detail = f": {cause}" if cause else ""
        super().__init__(f"could not access {self.path}{detail}")
