"""Probe transports: the simulated network wire and raw sockets.

The simulated transport is the required implementation and the test
substrate; every packet crosses the simulated wire as real bytes
(encode -> decode on both legs), so codec fidelity is exercised end to
end. The raw-socket transport targets real scans, needs privileges, is
platform-dependent, and is excluded from CI.
"""

from __future__ import annotations

import ipaddress
import socket
import struct
import time
from dataclasses import dataclass
from typing import Protocol, Sequence

from ..censornet import CensorNetwork
from ..errors import TransportError
from ..netcodec import PacketLayers, Transport, decode_packet, encode_packet

SIM_SOURCE_V4 = "192.0.2.1"
SIM_SOURCE_V6 = "2001:db8:ffff::1"


class ProbeTransport(Protocol):
    """One probe (1..3 packets) per send; poll drains inbound packets."""

    def source_addr(self, ip_version: int) -> str: ...

    def now(self) -> float: ...

    def wait(self, seconds: float) -> None: ...

    def send(self, packets: Sequence[PacketLayers]) -> None: ...

    def poll(self) -> list[PacketLayers]: ...

    def close(self) -> None: ...


@dataclass(frozen=True, slots=True)
class ProbeSend:
    """Send-log entry: when one probe's packets hit the simulated wire."""

    time: float
    packets: tuple[PacketLayers, ...]


class SimulatedTransport:
    """Wire to a :class:`CensorNetwork`, on the scenario's virtual clock."""

    def __init__(
        self,
        network: CensorNetwork,
        source_v4: str = SIM_SOURCE_V4,
        source_v6: str = SIM_SOURCE_V6,
        inter_packet_delay: float = 0.0,
    ):
        self.network = network
        self._sources = {4: source_v4, 6: source_v6}
        self.inter_packet_delay = inter_packet_delay
        self.sent_log: list[ProbeSend] = []
        self._inbox: list[bytes] = []

    def source_addr(self, ip_version: int) -> str:
        return self._sources[ip_version]

    def now(self) -> float:
        return self.network.now

    def wait(self, seconds: float) -> None:
        if seconds > 0:
            self.network.advance_time(seconds)

    def send(self, packets: Sequence[PacketLayers]) -> None:
        self.sent_log.append(ProbeSend(self.network.now, tuple(packets)))
        for i, packet in enumerate(packets):
            if i and self.inter_packet_delay:
                self.network.advance_time(self.inter_packet_delay)
            wire = encode_packet(packet)  # cross the wire as real bytes
            for response in self.network.deliver(decode_packet(wire)):
                self._inbox.append(encode_packet(response))

    def poll(self) -> list[PacketLayers]:
        inbound = [decode_packet(wire) for wire in self._inbox]
        self._inbox.clear()
        return inbound

    def close(self) -> None:
        self._inbox.clear()


class RawSocketTransport:
    """Raw-socket sender/listener for real scans. Requires privileges.

    IPv4 packets are sent whole (IP_HDRINCL); IPv6 sends hand the kernel
    the transport segment, so the configured v6 source must be a local
    address. Inbound TCP and UDP are captured with raw receive sockets.
    """

    def __init__(self, source_v4: str | None, source_v6: str | None):
        self._sources = {}
        self._send4 = self._send6_tcp = self._send6_udp = None
        self._recv: list[socket.socket] = []
        try:
            if source_v4:
                self._sources[4] = source_v4
                self._send4 = socket.socket(socket.AF_INET, socket.SOCK_RAW, socket.IPPROTO_RAW)
                for proto in (socket.IPPROTO_TCP, socket.IPPROTO_UDP):
                    s = socket.socket(socket.AF_INET, socket.SOCK_RAW, proto)
                    s.setblocking(False)
                    self._recv.append(s)
            if source_v6:
                self._sources[6] = source_v6
                self._send6_tcp = socket.socket(
                    socket.AF_INET6, socket.SOCK_RAW, socket.IPPROTO_TCP
                )
                self._send6_udp = socket.socket(
                    socket.AF_INET6, socket.SOCK_RAW, socket.IPPROTO_UDP
                )
                for s in (self._send6_tcp, self._send6_udp):
                    s.bind((source_v6, 0))
                for proto in (socket.IPPROTO_TCP, socket.IPPROTO_UDP):
                    s = socket.socket(socket.AF_INET6, socket.SOCK_RAW, proto)
                    s.setblocking(False)
                    self._recv.append(s)
        except OSError as exc:
            self.close()
            raise TransportError(
                f"cannot open raw sockets ({exc}); scanning needs root/CAP_NET_RAW"
            ) from None
        if not self._sources:
            raise TransportError("raw transport needs at least one source address")

    def source_addr(self, ip_version: int) -> str:
        try:
            return self._sources[ip_version]
        except KeyError:
            raise TransportError(f"no IPv{ip_version} source configured") from None

    def now(self) -> float:
        return time.time()

    def wait(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)

    def send(self, packets: Sequence[PacketLayers]) -> None:
        for packet in packets:
            wire = encode_packet(packet)
            if packet.ip_version == 4:
                if self._send4 is None:
                    raise TransportError("no IPv4 send socket")
                self._send4.sendto(wire, (packet.dst_addr, 0))
            else:
                sock = (
                    self._send6_tcp if packet.transport is Transport.TCP else self._send6_udp
                )
                if sock is None:
                    raise TransportError("no IPv6 send socket")
                sock.sendto(wire[40:], (packet.dst_addr, 0))  # kernel builds the v6 header

    def poll(self) -> list[PacketLayers]:
        inbound = []
        for sock in self._recv:
            while True:
                try:
                    data, peer = sock.recvfrom(65535)
                except (BlockingIOError, InterruptedError):
                    break
                except OSError:
                    break
                try:
                    if sock.family == socket.AF_INET:
                        inbound.append(decode_packet(data))
                    else:
                        # v6 raw receive strips the IP header; rebuild one
                        inbound.append(self._rewrap_v6(data, peer[0], sock.proto))
                except Exception:
                    continue  # unparseable background noise
        return inbound

    def _rewrap_v6(self, segment: bytes, src: str, proto: int) -> PacketLayers:
        dst = self._sources[6]
        header = (
            struct.pack("!IHBB", 0x60000000, len(segment), proto, 64)
            + ipaddress.IPv6Address(src).packed
            + ipaddress.IPv6Address(dst).packed
        )
        return decode_packet(header + segment)

    def close(self) -> None:
        for sock in [self._send4, self._send6_tcp, self._send6_udp, *self._recv]:
            if sock is not None:
                try:
                    sock.close()
                except OSError:
                    pass
        self._recv = []
