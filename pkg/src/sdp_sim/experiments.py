"""Figure reproductions and the end-to-end broker walkthrough."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

from . import __version__, units
from .broker import BrokerError, ServiceRegistry
from .curves import LatencyRateProfile, LeakyBucketDescriptor
from .qos import InfeasibleDemand
from .scenario import Experiment, Scenario, ScenarioError, Sweep
from .study import PartitionPolicy, compare

INFEASIBLE = "infeasible"


@dataclass
class ResultTable:
    experiment: str
    headers: list[str]
    units: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.units) != len(self.headers):
            raise ValueError("one unit per column")

    def add(self, row: Sequence[Any]) -> None:
        if len(row) != len(self.headers):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.headers)} columns")
        self.rows.append(list(row))

    def column(self, name: str) -> list[Any]:
        k = self.headers.index(name)
        return [r[k] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.headers)
        w.writerow(self.units)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()


def _cell(v: Any) -> str:
    if v is None:
        return INFEASIBLE
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _override(exp: Experiment, overrides: dict[str, Any] | None) -> Experiment:
    if not overrides:
        return exp
    unknown = set(overrides) - {f.name for f in dataclasses.fields(Experiment)}
    if unknown:
        raise ScenarioError(f"unknown overrides: {', '.join(sorted(unknown))}")
    kw = {k: v for k, v in overrides.items() if v is not None}
    if "flows" in kw:
        kw["flows"] = tuple(kw["flows"])
    exp = dataclasses.replace(exp, **kw)
    if exp.theta_ms < 0 or exp.domains < 1 or exp.fixed_delay_ms <= 0:
        raise ScenarioError("theta must be >= 0, domains >= 1, delay > 0")
    sw = exp.delay_ms
    if sw.step <= 0 or sw.start <= 0 or sw.stop < sw.start:
        raise ScenarioError(f"bad delay sweep {sw}")
    if exp.latency_scope not in ("domain", "path"):
        raise ScenarioError(f"latency scope must be 'domain' or 'path', got {exp.latency_scope!r}")
    return exp


def _flows(scenario: Scenario, exp: Experiment) -> list[tuple[str, LeakyBucketDescriptor]]:
    names = exp.flows or tuple(n for n in ("f1", "f2") if n in scenario.flows) or tuple(scenario.flows)
    missing = [n for n in names if n not in scenario.flows]
    if missing:
        raise ScenarioError(f"unknown flows: {', '.join(missing)}")
    return [(n, scenario.flows[n]) for n in names]


def _path(exp: Experiment, n: int) -> list[LatencyRateProfile]:
    # rates never enter the allocation formulas; the path is defined by latency only
    theta = units.ms(exp.theta_ms)
    if exp.latency_scope == "path":
        theta = theta / n
    return [LatencyRateProfile(math.inf, theta)] * n


def _policy(exp: Experiment, n: int) -> tuple[str, Any]:
    if exp.weights is None:
        return "equal", None
    if len(exp.weights) != n:
        raise ScenarioError(f"{len(exp.weights)} partition weights for {n} domains")
    return "explicit", exp.weights


def _row(load, profiles, d_e, exp) -> tuple[float | None, float | None, float | None]:
    """(R_e, R_d, U) with R_d the largest per-domain rate."""
    kind, weights = _policy(exp, len(profiles))
    if kind == "explicit":
        total = math.fsum(weights)
        policy = PartitionPolicy.explicit([d_e * w / total for w in weights])
    else:
        policy = PartitionPolicy()
    row = compare(load, profiles, d_e, policy)
    if not row.feasible:
        return row.r_e, None, None
    k = max(range(row.n), key=lambda i: row.r_i[i])
    return row.r_e, row.r_i[k], row.u[k]


def run_figure(
    scenario: Scenario, figure: str, overrides: dict[str, Any] | None = None
) -> ResultTable:
    """Regenerate one figure's data as a table in canonical units.

    fig4: end-to-end rate per flow over the delay sweep. fig6: end-to-end
    and per-domain rate per flow. fig7: the same plus their ratio. fig8:
    ratio per flow against the number of domains at a fixed delay.
    """
    exp = _override(scenario.experiment(figure), overrides)
    flows = _flows(scenario, exp)
    meta = {
        "figure": figure,
        "scenario": scenario.name,
        "theta_ms": exp.theta_ms,
        "latency_scope": exp.latency_scope,
        "partition": "explicit" if exp.weights else "equal",
        "flows": {n: dataclasses.asdict(f) for n, f in flows},
        "tool_version": __version__,
    }

    if figure == "fig8":
        lo, hi = exp.domain_range
        meta.update(delay_ms=exp.fixed_delay_ms, domains=[lo, hi])
        table = ResultTable(
            figure,
            ["n"] + [f"u_{n}" for n, _ in flows],
            ["domains"] + ["ratio"] * len(flows),
            metadata=meta,
        )
        d_e = units.ms(exp.fixed_delay_ms)
        for n in range(lo, hi + 1):
            profiles = _path(exp, n)
            table.add([n] + [_row(load, profiles, d_e, exp)[2] for _, load in flows])
        return table

    profiles = _path(exp, exp.domains)
    meta.update(domains=exp.domains, delay_ms=dataclasses.asdict(exp.delay_ms))
    headers, unit_row = ["d_e_req"], ["s"]
    for n, _ in flows:
        headers.append(f"r_e_{n}")
        if figure in ("fig6", "fig7"):
            headers.append(f"r_d_{n}")
        if figure == "fig7":
            headers.append(f"u_{n}")
    for h in headers[1:]:
        unit_row.append("ratio" if h.startswith("u_") else "bit/s")
    table = ResultTable(figure, headers, unit_row, metadata=meta)

    for d_ms in exp.delay_ms.points():
        d_e = units.ms(d_ms)
        row: list[Any] = [d_e]
        for _, load in flows:
            r_e, r_d, u = _row(load, profiles, d_e, exp)
            row.append(r_e)
            if figure in ("fig6", "fig7"):
                row.append(r_d)
            if figure == "fig7":
                row.append(u)
        table.add(row)
    return table


@dataclass(frozen=True)
class Event:
    step: str
    subject: str
    detail: str

    def __str__(self):
        return f"{self.step:<12} {self.subject:<10} {self.detail}"


def _fmt_rate(bps: float) -> str:
    return f"{units.to_mbps(bps):.6f} Mbps"


def run_demo(scenario: Scenario, registry: ServiceRegistry | None = None) -> list[Event]:
    """Walk every demand through publish, request, discover, orchestrate, allocate."""
    reg = registry or ServiceRegistry()
    log: list[Event] = []
    for m in scenario.matrices:
        v = reg.publish(m)
        log.append(Event("publish", m.domain, f"version {v}, {len(m.entries)} virtual links"))
    for p in scenario.peering:
        reg.add_peering(p)
        log.append(Event("peering", "-", p.link_id))

    for dem in scenario.demands:
        name = dem.name
        qos = []
        if dem.throughput is not None:
            qos.append(f"T_req={_fmt_rate(dem.throughput)}")
        if dem.delay is not None:
            qos.append(f"D_req={units.to_ms(dem.delay):g} ms")
        log.append(Event("request", name, f"{dem.source} -> {dem.destination} " + " ".join(qos)))

        chain = reg.discover_single(dem)
        if chain is not None:
            log.append(Event("discover", name, f"single service {chain.link_ids[0]}"))
        else:
            log.append(Event("discover", name, "no single-domain service"))
            chain = reg.orchestrate_chain(dem)
            if chain is None:
                log.append(Event("orchestrate", name, "no feasible chain"))
                log.append(Event("reject", name, _reason(dem, reg)))
                continue
            log.append(
                Event(
                    "orchestrate",
                    name,
                    f"{chain.domain_count} domains {'/'.join(chain.domains)}, "
                    f"rate {_fmt_rate(chain.profile.rate)} latency {units.to_ms(chain.profile.latency):g} ms",
                )
            )
        try:
            ticket = reg.allocate(chain, dem)
        except (BrokerError, InfeasibleDemand) as exc:
            log.append(Event("reject", name, str(exc)))
            continue
        log.append(Event("allocate", name, f"{ticket.request_id} {_fmt_rate(ticket.rate)} on {len(ticket.grants)} links"))
    return log


def _reason(dem, reg: ServiceRegistry) -> str:
    # explain a rejection by re-running the search without capacity limits
    probe = ServiceRegistry()
    for d in reg.domains:
        probe.publish(reg.matrix(d))
    for link in reg.snapshot().links.values():
        if link.link_id.startswith("peer:"):
            probe.add_peering(link)
    if probe.find_service(dem) is None:
        return "infeasible: no path meets the QoS targets even with idle links"
    return "insufficient residual capacity"
