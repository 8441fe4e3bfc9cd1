"""Service delivery broker: registry, discovery, orchestration and admission.

The registry keeps the latest capability matrix per domain plus the
peering links between domains. Residual rates are never stored directly;
each link keeps the grants of its outstanding tickets and the residual is
``rate - sum(grants)``, so conservation holds by construction and a
release restores the previous residual bit for bit.

Writers (publish, allocate, release) serialize on one lock. Discovery and
orchestration copy a snapshot under the lock and search outside it.
"""

from __future__ import annotations

import itertools
import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .domains import (
    BorderNodeId,
    CapabilityMatrix,
    Hop,
    PeeringLink,
    ServiceChain,
    VirtualLink,
    validate_matrix,
)
from .qos import BOUNDARY_SLACK, DemandProfile, InfeasibleDemand, min_capacity

log = logging.getLogger(__name__)


class BrokerError(Exception):
    pass


class ValidationRejected(BrokerError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class InsufficientResidual(BrokerError):
    def __init__(self, link_id: str, residual: float, needed: float):
        super().__init__(f"{link_id}: residual {residual!r} < required {needed!r}")
        self.link_id = link_id
        self.residual = residual
        self.needed = needed


class StaleChain(BrokerError):
    pass


class UnknownTicket(BrokerError):
    pass


@dataclass(frozen=True)
class Grant:
    domain: str | None
    link_id: str
    rate: float


@dataclass(frozen=True)
class AllocationTicket:
    request_id: str
    chain: ServiceChain
    rate: float
    grants: tuple[Grant, ...]
    demand: DemandProfile | None = None


@dataclass
class _Snapshot:
    version: int
    domain_versions: dict[str, int]
    links: dict[str, Hop]
    residuals: dict[str, float]

    def residual(self, link_id: str) -> float:
        return self.residuals.get(link_id, math.inf)


@dataclass
class ServiceRegistry:
    """Shared broker state; all public methods are thread safe."""

    version: int = 0
    _matrices: dict[str, CapabilityMatrix] = field(default_factory=dict)
    _domain_versions: dict[str, int] = field(default_factory=dict)
    _peering: dict[str, PeeringLink] = field(default_factory=dict)
    _grants: dict[str, dict[str, float]] = field(default_factory=dict)
    _tickets: dict[str, AllocationTicket] = field(default_factory=dict)
    _stale: set[str] = field(default_factory=set)
    _ids: Iterator[int] = field(default_factory=lambda: itertools.count(1))
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    # -- publication -------------------------------------------------

    def publish(self, matrix: CapabilityMatrix) -> int:
        problems = validate_matrix(matrix)
        if problems:
            raise ValidationRejected(problems)
        with self._lock:
            old = self._matrices.get(matrix.domain)
            self.version += 1
            self._matrices[matrix.domain] = matrix
            self._domain_versions[matrix.domain] = self.version
            if old is not None:
                self._flag_stale(old, matrix)
            log.info("published %s as version %d", matrix.domain, self.version)
            return self.version

    def add_peering(self, link: PeeringLink) -> None:
        problems = link.profile.violations()
        if problems:
            raise ValidationRejected([f"{link.link_id}: {p}" for p in problems])
        with self._lock:
            self._peering[link.link_id] = link

    def _flag_stale(self, old: CapabilityMatrix, new: CapabilityMatrix) -> None:
        for vl in old.virtual_links():
            carried = self._grants.get(vl.link_id)
            if not carried:
                continue
            replacement = new.profile(vl.src, vl.dst)
            if replacement is None or replacement.rate < vl.profile.rate:
                self._stale.update(carried)

    # -- state queries -----------------------------------------------

    def _links(self) -> dict[str, Hop]:
        links: dict[str, Hop] = {}
        for m in self._matrices.values():
            for vl in m.virtual_links():
                links[vl.link_id] = vl
        links.update(self._peering)
        return links

    def _residual(self, link: Hop) -> float:
        rate = link.profile.rate
        if not math.isfinite(rate):
            return math.inf
        used = math.fsum(self._grants.get(link.link_id, {}).values())
        return min(rate, max(0.0, rate - used))

    def residual(self, link_id: str) -> float:
        with self._lock:
            link = self._links().get(link_id)
            if link is None:
                raise KeyError(link_id)
            return self._residual(link)

    def outstanding(self, link_id: str) -> dict[str, float]:
        with self._lock:
            return dict(self._grants.get(link_id, {}))

    def matrix(self, domain: str) -> CapabilityMatrix:
        with self._lock:
            return self._matrices[domain]

    @property
    def domains(self) -> list[str]:
        with self._lock:
            return sorted(self._matrices)

    def tickets(self) -> list[AllocationTicket]:
        with self._lock:
            return list(self._tickets.values())

    def stale_tickets(self) -> set[str]:
        with self._lock:
            return set(self._stale)

    def snapshot(self) -> _Snapshot:
        with self._lock:
            links = self._links()
            return _Snapshot(
                self.version,
                dict(self._domain_versions),
                links,
                {lid: self._residual(link) for lid, link in links.items()},
            )

    def state_rows(self) -> list[tuple[str, str, float, float, float]]:
        """``(link_id, domain, rate, residual, granted)`` for every finite-rate link."""
        with self._lock:
            rows = []
            for lid, link in sorted(self._links().items()):
                if not math.isfinite(link.profile.rate):
                    continue
                granted = math.fsum(self._grants.get(lid, {}).values())
                rows.append((lid, link.domain or "", link.profile.rate, self._residual(link), granted))
            return rows

    # -- discovery ---------------------------------------------------

    def discover_single(self, demand: DemandProfile) -> ServiceChain | None:
        """Best one-hop service from a single domain, or ``None``.

        Prefers the largest residual, then the lexically smallest domain.
        """
        demand.require_valid()
        snap = self.snapshot()
        best = None
        for link in snap.links.values():
            if not isinstance(link, VirtualLink):
                continue
            if not (demand.source.matches(link.src) and demand.destination.matches(link.dst)):
                continue
            try:
                need = min_capacity(demand, link.profile.latency)
            except InfeasibleDemand:
                continue
            res = snap.residual(link.link_id)
            if res < need:
                continue
            key = (-res, link.domain, link.link_id)
            if best is None or key < best[0]:
                best = (key, link)
        if best is None:
            return None
        link = best[1]
        return ServiceChain.of([link], {link.domain: snap.domain_versions[link.domain]})

    def orchestrate_chain(self, demand: DemandProfile) -> ServiceChain | None:
        """Search multi-domain chains; fewest domains, then widest bottleneck, then hop ids."""
        demand.require_valid()
        snap = self.snapshot()
        best = None
        for hops in _feasible_chains(snap, demand):
            bottleneck = min(snap.residual(h.link_id) for h in hops)
            n_domains = sum(isinstance(h, VirtualLink) for h in hops)
            key = (n_domains, -bottleneck, tuple(h.link_id for h in hops))
            if best is None or key < best[0]:
                best = (key, hops)
        if best is None:
            return None
        hops = best[1]
        versions = {h.domain: snap.domain_versions[h.domain] for h in hops if isinstance(h, VirtualLink)}
        return ServiceChain.of(hops, versions)

    def find_service(self, demand: DemandProfile) -> ServiceChain | None:
        """Single-domain discovery first, then multi-domain orchestration."""
        return self.discover_single(demand) or self.orchestrate_chain(demand)

    # -- admission ---------------------------------------------------

    def allocate(self, chain: ServiceChain, demand: DemandProfile) -> AllocationTicket:
        """Reserve ``C_min`` on every hop of ``chain``, all or nothing."""
        demand.require_valid()
        need = min_capacity(demand, chain.profile.latency)
        with self._lock:
            links = self._links()
            for hop in chain.hops:
                current = links.get(hop.link_id)
                if current is None or current.profile != hop.profile:
                    raise StaleChain(f"{hop.link_id} changed since the chain was found")
            for hop in chain.hops:
                res = self._residual(links[hop.link_id])
                if res < need:
                    raise InsufficientResidual(hop.link_id, res, need)
            ticket_id = f"T{next(self._ids):06d}"
            grants = []
            for hop in chain.hops:
                if not math.isfinite(hop.profile.rate):
                    continue
                self._grants.setdefault(hop.link_id, {})[ticket_id] = need
                grants.append(Grant(hop.domain, hop.link_id, need))
            ticket = AllocationTicket(ticket_id, chain, need, tuple(grants), demand)
            self._tickets[ticket_id] = ticket
            log.info("allocated %s: %.6g bit/s on %d hops", ticket_id, need, len(chain.hops))
            return ticket

    def release(self, ticket: AllocationTicket | str) -> None:
        ticket_id = ticket if isinstance(ticket, str) else ticket.request_id
        with self._lock:
            held = self._tickets.pop(ticket_id, None)
            if held is None:
                raise UnknownTicket(f"{ticket_id} is not outstanding")
            for g in held.grants:
                carried = self._grants.get(g.link_id)
                if carried is not None:
                    carried.pop(ticket_id, None)
                    if not carried:
                        del self._grants[g.link_id]
            self._stale.discard(ticket_id)

    def conservation_errors(self) -> list[str]:
        """Links where ``rate - residual`` differs from the outstanding grants."""
        with self._lock:
            out = []
            for lid, link in self._links().items():
                rate = link.profile.rate
                if not math.isfinite(rate):
                    continue
                granted = math.fsum(
                    g.rate for t in self._tickets.values() for g in t.grants if g.link_id == lid
                )
                used = rate - self._residual(link)
                if not math.isclose(used, granted, rel_tol=1e-12, abs_tol=1e-6):
                    out.append(f"{lid}: rate {rate!r} used {used!r} granted {granted!r}")
            return out


def _feasible_chains(snap: _Snapshot, demand: DemandProfile) -> Iterable[tuple[Hop, ...]]:
    """Depth-first enumeration of admissible chains from source to destination.

    A chain visits each domain at most once and never takes two peering
    links in a row. Branches are cut as soon as the accumulated latency or
    the bottleneck residual rules them out, since ``C_min`` only grows with
    latency.
    """
    out_edges: dict[BorderNodeId, list[Hop]] = {}
    for link in sorted(snap.links.values(), key=lambda h: h.link_id):
        out_edges.setdefault(link.src, []).append(link)
    starts = sorted({n for n in out_edges if demand.source.matches(n)}, key=str)

    def need(theta: float) -> float | None:
        try:
            return min_capacity(demand, theta)
        except InfeasibleDemand:
            return None

    def walk(node, hops, domains, nodes, theta, bottleneck):
        for link in out_edges.get(node, ()):
            is_virtual = isinstance(link, VirtualLink)
            if link.dst in nodes:
                continue
            if is_virtual and link.domain in domains:
                continue
            if not is_virtual and hops and not isinstance(hops[-1], VirtualLink):
                continue
            th = theta + link.profile.latency
            bn = min(bottleneck, snap.residual(link.link_id))
            if demand.delay is not None and th > demand.delay + BOUNDARY_SLACK:
                continue
            c = need(th)
            if c is None or bn < c:
                continue
            path = hops + (link,)
            if demand.destination.matches(link.dst):
                if any(isinstance(h, VirtualLink) for h in path):
                    yield path
                continue
            yield from walk(
                link.dst,
                path,
                domains | {link.domain} if is_virtual else domains,
                nodes | {link.dst},
                th,
                bn,
            )

    for s in starts:
        yield from walk(s, (), frozenset(), frozenset({s}), 0.0, math.inf)
