"""Scan scheduling and ingest.

Probes go out in domain-major round-robin order: every target receives
its probe for domain i before any probe for domain i+1 is sent, and no
target is probed again before its pacing gap has elapsed. A single
ingest path decodes, tag-validates, and classifies every inbound packet
and appends the observation to a durable sink as it is produced.

Concurrency contract: senders may be parallelized as long as the
domain-major barrier holds and exactly one consumer owns ingest; this
implementation is single-threaded, which trivially satisfies both.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Sequence

from ..netcodec import ResponseClass, Transport, classify_payload, decode_dns
from ..netcodec.packet import PacketLayers, TcpFlags
from ..tagging import TagMap, validate_response
from ..targets import TargetAddress
from .probes import ProbeProtocol, ProbeSpec, emit_probe
from .transport import ProbeTransport


@dataclass(frozen=True, slots=True)
class ProbePlan:
    domains: tuple[str, ...]
    targets: tuple[TargetAddress, ...]
    protocols: tuple[ProbeProtocol, ...]
    pacing: float
    seed: int
    rate: float | None = None  # overall sends/sec cap

    def __post_init__(self) -> None:
        if self.pacing <= 0:
            raise ValueError(f"pacing must be positive, got {self.pacing}")


@dataclass(frozen=True, slots=True)
class ResponseObservation:
    timestamp: str
    target: str
    domain: str | None
    probe_protocol: str
    response_class: str
    valid_tag: bool
    payload_digest: str
    payload_len: int
    seq_delta: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "ResponseObservation":
        return cls(**json.loads(line))


class JsonlSink:
    """Observation log, flushed per record; pass mode="a" to resume a run."""

    def __init__(self, path: Path | str, mode: str = "w"):
        self.path = Path(path)
        self._fh: IO[str] = open(self.path, mode)

    def append(self, obs: ResponseObservation) -> None:
        self._fh.write(obs.to_json() + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def read_observations(path: Path | str) -> list[ResponseObservation]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(ResponseObservation.from_json(line))
    return out


def _rfc3339(epoch: float) -> str:
    return datetime.fromtimestamp(epoch, tz=timezone.utc).isoformat()


class Scanner:
    """Owns pacing state and the ingest path across scan phases.

    One Scanner instance should be reused for the control pass and the
    main scan so per-target pacing holds across the phase boundary.
    """

    def __init__(
        self,
        tags: TagMap,
        transport: ProbeTransport,
        sink: JsonlSink | None = None,
        checkpoint_path: Path | str | None = None,
    ):
        self.tags = tags
        self.transport = transport
        self.sink = sink
        self.checkpoint_path = Path(checkpoint_path) if checkpoint_path else None
        self._last_sent: dict[str, float] = {}
        self._last_send_any = float("-inf")

    # --- scheduling -------------------------------------------------------

    def run_scan(
        self,
        plan: ProbePlan,
        start_cursor: tuple[int, int] = (0, 0),
    ) -> list[ResponseObservation]:
        """Send the full plan; return (and sink) every observation."""
        rng = random.Random(plan.seed)
        observations: list[ResponseObservation] = []
        start_domain, start_target = start_cursor
        for d_idx, domain in enumerate(plan.domains):
            if d_idx < start_domain:
                continue
            for protocol in plan.protocols:
                for t_idx, target in enumerate(plan.targets):
                    if d_idx == start_domain and t_idx < start_target:
                        continue
                    self._pace(plan, target.addr)
                    spec = ProbeSpec(protocol=protocol, domain=domain, target=target)
                    packets = emit_probe(
                        spec, self.tags, rng, self.transport.source_addr(target.ip_version)
                    )
                    self.transport.send(packets)
                    sent_at = self.transport.now()
                    self._last_sent[target.addr] = sent_at
                    self._last_send_any = sent_at
                    self._drain(observations, active=spec)
            start_target = 0
            self._checkpoint(d_idx + 1)
        self._drain(observations, active=None)
        return observations

    def probe_controls(
        self,
        targets: Sequence[TargetAddress],
        controls: Sequence[str],
        protocols: Sequence[ProbeProtocol],
        pacing: float,
        seed: int,
        rate: float | None = None,
    ) -> set[str]:
        """Addresses that gave any tag-valid response to any control domain."""
        plan = ProbePlan(
            domains=tuple(controls),
            targets=tuple(targets),
            protocols=tuple(protocols),
            pacing=pacing,
            seed=seed,
            rate=rate,
        )
        # the resume cursor tracks the main scan, not the control pass
        saved_checkpoint = self.checkpoint_path
        self.checkpoint_path = None
        try:
            observations = self.run_scan(plan)
        finally:
            self.checkpoint_path = saved_checkpoint
        return {obs.target for obs in observations if obs.valid_tag}

    def _pace(self, plan: ProbePlan, target_addr: str) -> None:
        due = self._last_sent.get(target_addr, float("-inf")) + plan.pacing
        if plan.rate:
            due = max(due, self._last_send_any + 1.0 / plan.rate)
        gap = due - self.transport.now()
        if gap > 0:
            self.transport.wait(gap)

    def _checkpoint(self, next_domain_index: int) -> None:
        if self.checkpoint_path is None:
            return
        cursor = {"domain_index": next_domain_index, "target_index": 0}
        self.checkpoint_path.write_text(json.dumps(cursor))

    # --- ingest -------------------------------------------------------------

    def _drain(
        self, observations: list[ResponseObservation], active: ProbeSpec | None
    ) -> None:
        for inbound in self.transport.poll():
            obs = self._ingest(inbound, active)
            observations.append(obs)
            if self.sink is not None:
                self.sink.append(obs)

    def _ingest(self, inbound: PacketLayers, active: ProbeSpec | None) -> ResponseObservation:
        validation = validate_response(inbound, self.tags)
        cls = self._response_class(inbound)
        return ResponseObservation(
            timestamp=_rfc3339(self.transport.now()),
            target=inbound.src_addr,
            domain=validation.matched_domain,
            probe_protocol=self._attribute_protocol(inbound, active).value,
            response_class=cls.value,
            valid_tag=validation.valid,
            payload_digest=hashlib.sha256(inbound.payload).hexdigest(),
            payload_len=len(inbound.payload),
            seq_delta=validation.seq_delta,
        )

    @staticmethod
    def _response_class(inbound: PacketLayers) -> ResponseClass:
        if inbound.transport is Transport.TCP and inbound.tcp_flags & TcpFlags.RST:
            if inbound.tcp_flags & TcpFlags.ACK:
                return ResponseClass.RST_ACK
            return ResponseClass.RST
        cls = classify_payload(inbound.payload, inbound.transport)
        return ResponseClass.OTHER if cls is ResponseClass.EMPTY else cls

    def _attribute_protocol(
        self, inbound: PacketLayers, active: ProbeSpec | None
    ) -> ProbeProtocol:
        """Which probe type elicited this response.

        The send loop polls right after each send, so the active spec is
        authoritative when the response's tag and source line up with it.
        Otherwise fall back to the probed port, inferring the DNS record
        type from the echoed question and TCP statefulness from the
        active spec when it is the same family.
        """
        if active is not None:
            domain = self.tags.port_to_domain.get(inbound.dst_port)
            if domain == active.domain and inbound.src_addr == active.target.addr:
                return active.protocol
        if inbound.transport is Transport.UDP:
            try:
                msg = decode_dns(inbound.payload)
                if msg.question is not None and msg.question.qtype == 28:
                    return ProbeProtocol.DNS_AAAA
            except Exception:
                pass
            return ProbeProtocol.DNS_A
        family = "tls" if inbound.src_port == 443 else "http"
        if active is not None and active.protocol.family == family:
            return active.protocol
        return ProbeProtocol[f"{family.upper()}_STATELESS"]
