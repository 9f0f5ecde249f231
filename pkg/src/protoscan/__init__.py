"""Bidirectional censorship measurement toolkit.

Builds country-labeled target sets from registry and routing data, sends
tagged DNS/HTTP/TLS probes to non-responsive addresses, statelessly
validates injected responses, and classifies censorship per country, AS,
protocol, and IP version. Ships with an in-process simulated censor
network so the whole pipeline can be exercised without touching the
real Internet.
"""

__version__ = "0.1.0"
