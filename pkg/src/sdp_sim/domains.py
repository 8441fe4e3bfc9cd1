"""Per-domain capability matrices and end-to-end service chains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from types import MappingProxyType
from typing import Mapping, Sequence, Union

from .curves import LatencyRateProfile, convolve_lr

# Peering links default to a profile that never limits the chain.
NEUTRAL_PEERING = LatencyRateProfile(math.inf, 0.0)


@dataclass(frozen=True, order=True)
class BorderNodeId:
    """A border node. ``domain=None`` in a demand matches the label in any domain."""

    domain: str | None
    label: str

    def __str__(self):
        return f"{self.domain or '*'}:{self.label}"

    def matches(self, other: BorderNodeId) -> bool:
        return self.label == other.label and (
            self.domain is None or other.domain is None or self.domain == other.domain
        )


@dataclass(frozen=True)
class CapabilityMatrix:
    """Sparse directed matrix of latency-rate profiles over a domain's border nodes.

    A missing ``(i, j)`` entry means the domain offers no virtual connection
    from ``i`` to ``j``.
    """

    domain: str
    nodes: tuple[BorderNodeId, ...]
    entries: Mapping[tuple[BorderNodeId, BorderNodeId], LatencyRateProfile] = field(
        default_factory=dict
    )

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    @classmethod
    def build(
        cls,
        domain: str,
        labels: Sequence[str],
        entries: Mapping[tuple[str, str], LatencyRateProfile],
    ) -> CapabilityMatrix:
        """Convenience constructor keyed by node labels."""
        nodes = tuple(BorderNodeId(domain, lab) for lab in labels)
        return cls(
            domain,
            nodes,
            {
                (BorderNodeId(domain, i), BorderNodeId(domain, j)): prof
                for (i, j), prof in entries.items()
            },
        )

    def profile(self, i: BorderNodeId, j: BorderNodeId) -> LatencyRateProfile | None:
        return self.entries.get((i, j))

    def virtual_links(self) -> list[VirtualLink]:
        return [
            VirtualLink(i, j, prof)
            for (i, j), prof in sorted(self.entries.items(), key=lambda kv: kv[0])
        ]


@dataclass(frozen=True)
class VirtualLink:
    src: BorderNodeId
    dst: BorderNodeId
    profile: LatencyRateProfile

    @property
    def link_id(self) -> str:
        return f"{self.src.domain}:{self.src.label}->{self.dst.label}"

    @property
    def domain(self) -> str | None:
        return self.src.domain


@dataclass(frozen=True)
class PeeringLink:
    src: BorderNodeId
    dst: BorderNodeId
    profile: LatencyRateProfile = NEUTRAL_PEERING

    def __post_init__(self):
        if self.src.domain == self.dst.domain:
            raise ValueError(f"peering link {self.src} -> {self.dst} must join two domains")

    @property
    def link_id(self) -> str:
        return f"peer:{self.src}->{self.dst}"

    @property
    def domain(self) -> None:
        return None


Hop = Union[VirtualLink, PeeringLink]


@dataclass(frozen=True)
class ServiceChain:
    """Ordered, endpoint-contiguous hops from source to destination.

    ``versions`` records the publish version of every domain the chain
    crosses, so the broker can tell whether the chain went stale.
    """

    hops: tuple[Hop, ...]
    profile: LatencyRateProfile
    versions: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "hops", tuple(self.hops))
        object.__setattr__(self, "versions", MappingProxyType(dict(self.versions)))

    @classmethod
    def of(cls, hops: Sequence[Hop], versions: Mapping[str, int] | None = None) -> ServiceChain:
        if not hops:
            raise ValueError("a service chain needs at least one hop")
        for a, b in zip(hops, hops[1:]):
            if a.dst != b.src:
                raise ValueError(f"hops not contiguous: {a.link_id} then {b.link_id}")
        return cls(tuple(hops), compose_chain([h.profile for h in hops]), versions or {})

    @property
    def source(self) -> BorderNodeId:
        return self.hops[0].src

    @property
    def destination(self) -> BorderNodeId:
        return self.hops[-1].dst

    @property
    def domains(self) -> tuple[str, ...]:
        return tuple(h.domain for h in self.hops if isinstance(h, VirtualLink))

    @property
    def domain_count(self) -> int:
        return len(self.domains)

    @property
    def link_ids(self) -> tuple[str, ...]:
        return tuple(h.link_id for h in self.hops)


def compose_chain(profiles: Sequence[LatencyRateProfile]) -> LatencyRateProfile:
    """Fold of the latency-rate convolution: (min of rates, sum of latencies)."""
    if not profiles:
        raise ValueError("cannot compose an empty chain")
    if len(profiles) == 1:
        return profiles[0].require_valid()
    # one reduction per parameter keeps the result order-independent
    for p in profiles:
        p.require_valid()
    return LatencyRateProfile(
        min(p.rate for p in profiles), math.fsum(p.latency for p in profiles)
    )


def compose_pairwise(profiles: Sequence[LatencyRateProfile]) -> LatencyRateProfile:
    """Same result as :func:`compose_chain` built from binary convolutions."""
    if not profiles:
        raise ValueError("cannot compose an empty chain")
    return reduce(convolve_lr, profiles)


def validate_matrix(m: CapabilityMatrix) -> list[str]:
    """Return every broken invariant of ``m``; empty means well formed."""
    problems: list[str] = []
    listed = set(m.nodes)
    if len(listed) != len(m.nodes):
        problems.append(f"{m.domain}: duplicate border nodes")
    for node in m.nodes:
        if node.domain != m.domain:
            problems.append(f"{m.domain}: node {node} belongs to another domain")
    for (i, j), prof in sorted(m.entries.items(), key=lambda kv: kv[0]):
        where = f"{m.domain}: entry ({i.label},{j.label})"
        if i not in listed or j not in listed:
            problems.append(f"{where} references an unknown node")
        if i == j:
            problems.append(f"{where} is on the diagonal")
        if not isinstance(prof, LatencyRateProfile):
            problems.append(f"{where} is not a latency-rate profile")
            continue
        problems.extend(f"{where}: {v}" for v in prof.violations())
        if not math.isfinite(prof.rate):
            problems.append(f"{where}: rate must be finite")
    return problems
