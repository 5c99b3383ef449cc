"""
Exception hierarchy for the link simulator.

The CLI maps these onto exit codes: ConfigError -> 1, PhysicsError and any other
LinkSimError -> 2, OutputError -> 3.
"""


class LinkSimError(Exception):
    """Base class for every error raised by the simulator."""


class ConfigError(LinkSimError):
    """Scenario file could not be parsed, validated or resolved."""


class ParameterError(LinkSimError, ValueError):
    """An operation was called with arguments outside its preconditions."""


class PhysicsError(LinkSimError):
    """The simulated physics went somewhere it cannot continue from."""


class GridError(PhysicsError):
    """The sampling lattice cannot represent the requested signal."""


class AlignmentError(PhysicsError):
    """Received bits could not be aligned with the transmitted pattern."""


class OutputError(LinkSimError):
    """Writing results to disk failed."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
