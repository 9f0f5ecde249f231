"""Shared exception hierarchy. Subsystems raise their own subclasses."""


class ProtoscanError(Exception):
    """Base for all errors raised by this package."""


class CodecError(ProtoscanError):
    """Malformed or unserializable wire data."""


class InvalidHostname(CodecError):
    """Name violates hostname label rules."""


class DomainListError(ProtoscanError):
    """Domain list file missing, empty, or inconsistent."""


class AllocationError(ProtoscanError):
    """Registry allocation input exceeded its error budget or is unusable."""


class TagSpaceError(ProtoscanError):
    """More domains than available source ports."""


class ScenarioError(ProtoscanError):
    """Simulated-network scenario file is invalid."""


class TransportError(ProtoscanError):
    """Probe transport could not be opened or failed mid-scan."""
