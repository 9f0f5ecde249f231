"""Probe generation, scheduling, transports, and the ingest path."""

from .probes import ProbeProtocol, ProbeSpec, emit_probe, parse_protocols
from .scan import (
    JsonlSink,
    ProbePlan,
    ResponseObservation,
    Scanner,
    read_observations,
)
from .transport import (
    ProbeSend,
    ProbeTransport,
    RawSocketTransport,
    SimulatedTransport,
)

__all__ = [
    "JsonlSink",
    "ProbePlan",
    "ProbeProtocol",
    "ProbeSend",
    "ProbeSpec",
    "ProbeTransport",
    "RawSocketTransport",
    "ResponseObservation",
    "Scanner",
    "SimulatedTransport",
    "emit_probe",
    "parse_protocols",
    "read_observations",
]
