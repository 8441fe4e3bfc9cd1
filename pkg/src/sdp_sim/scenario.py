"""Scenario files: YAML in, validated canonical-unit objects out.

Schema (version 1)::

    schema: 1
    name: three-domain
    domains:
      - name: A
        nodes: [in, out]
        links:
          - {from: in, to: out, rate_mbps: 20, latency_ms: 10}
    peering:                      # optional; rate omitted = never the bottleneck
      - {from: "A:out", to: "B:in", latency_ms: 0}
    flows:
      - {name: f1, peak_mbps: 60, sustained_mbps: 1.5, burst_mbit: 1.04}
    demands:                      # node refs are "domain:label" or bare "label"
      - {name: d1, flow: f1, source: "A:in", destination: "C:out", delay_ms: 100}
    experiments:
      - figure: fig4
        flows: [f1, f2]
        theta_ms: 10
        domains: 3
        delay_ms: {start: 40, stop: 200, step: 5}
        partition: {kind: equal}  # or {kind: explicit, weights: [...]}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from . import units
from .curves import LatencyRateProfile, LeakyBucketDescriptor
from .domains import (
    NEUTRAL_PEERING,
    BorderNodeId,
    CapabilityMatrix,
    PeeringLink,
    validate_matrix,
)
from .qos import DemandProfile

SCHEMA_VERSION = 1
FIGURES = ("fig4", "fig6", "fig7", "fig8")


class ScenarioError(ValueError):
    """Base for everything wrong with a scenario file."""


class ScenarioParseError(ScenarioError):
    pass


class ScenarioValidationError(ScenarioError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class Sweep:
    start: float
    stop: float
    step: float

    def points(self) -> list[float]:
        # integer stepping keeps the grid free of accumulated rounding
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9))
        return [self.start + k * self.step for k in range(n + 1)]


@dataclass(frozen=True)
class Experiment:
    """Figure settings, kept in the scenario's units (ms) until run time."""

    figure: str
    flows: tuple[str, ...] | None = None
    theta_ms: float = 10.0
    domains: int = 3
    delay_ms: Sweep = Sweep(40.0, 200.0, 5.0)
    fixed_delay_ms: float = 60.0
    domain_range: tuple[int, int] = (1, 8)
    latency_scope: str = "domain"
    weights: tuple[float, ...] | None = None


@dataclass
class Scenario:
    name: str
    matrices: list[CapabilityMatrix] = field(default_factory=list)
    peering: list[PeeringLink] = field(default_factory=list)
    flows: dict[str, LeakyBucketDescriptor] = field(default_factory=dict)
    demands: list[DemandProfile] = field(default_factory=list)
    experiments: dict[str, Experiment] = field(default_factory=dict)
    source: str = ""

    def experiment(self, figure: str) -> Experiment:
        if figure not in FIGURES:
            raise ScenarioError(f"unsupported figure {figure!r}; choose from {', '.join(FIGURES)}")
        if figure in self.experiments:
            return self.experiments[figure]
        return default_experiment(figure)


def default_experiment(figure: str) -> Experiment:
    if figure == "fig8":
        # the total path latency stays fixed while the domain count varies
        return Experiment(figure, latency_scope="path")
    return Experiment(figure)


def bundled_scenarios() -> list[str]:
    root = resources.files("sdp_sim") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def _resolve(path: str | Path) -> tuple[str, str]:
    p = Path(path)
    if p.exists():
        return p.read_text(), str(p)
    name = str(path)
    if name in bundled_scenarios():
        res = resources.files("sdp_sim") / "scenarios" / f"{name}.yaml"
        return res.read_text(), f"<bundled:{name}>"
    raise FileNotFoundError(f"no scenario file or bundled scenario named {name!r}")


def load_scenario(path: str | Path) -> Scenario:
    """Read, parse and validate a scenario; raises :class:`ScenarioError` subclasses."""
    text, origin = _resolve(path)
    return parse_scenario(text, origin)


def parse_scenario(text: str, origin: str = "<string>") -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ScenarioParseError(f"{origin}: {where}: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(doc, dict):
        raise ScenarioParseError(f"{origin}: top level must be a mapping")
    return _Builder(origin).build(doc)


class _Builder:
    def __init__(self, origin: str):
        self.origin = origin
        self.problems: list[str] = []

    def fail(self, where: str, msg: str) -> None:
        self.problems.append(f"{where}: {msg}")

    def num(self, d: dict, key: str, where: str, *, positive=True, required=True, default=None):
        if key not in d or d[key] is None:
            if required:
                self.fail(where, f"missing field {key!r}")
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"{where}.{key}", f"expected a number, got {v!r}")
            return default
        v = float(v)
        if not math.isfinite(v):
            self.fail(f"{where}.{key}", "must be finite")
        elif positive and v <= 0:
            self.fail(f"{where}.{key}", f"must be > 0, got {v!r}")
        elif not positive and v < 0:
            self.fail(f"{where}.{key}", f"must be >= 0, got {v!r}")
        return v

    def build(self, doc: dict) -> Scenario:
        if doc.get("schema") != SCHEMA_VERSION:
            raise ScenarioParseError(
                f"{self.origin}: field 'schema' must be {SCHEMA_VERSION}, got {doc.get('schema')!r}"
            )
        sc = Scenario(name=str(doc.get("name", "")), source=self.origin)
        known_nodes: set[BorderNodeId] = set()

        for k, d in enumerate(doc.get("domains") or []):
            m = self.domain(d, f"domains[{k}]")
            if m is not None:
                if any(x.domain == m.domain for x in sc.matrices):
                    self.fail(f"domains[{k}]", f"duplicate domain {m.domain!r}")
                sc.matrices.append(m)
                known_nodes.update(m.nodes)

        for k, d in enumerate(doc.get("peering") or []):
            where = f"peering[{k}]"
            src, dst = self.ref(d.get("from"), f"{where}.from"), self.ref(d.get("to"), f"{where}.to")
            for ref, tag in ((src, "from"), (dst, "to")):
                if ref is not None and ref not in known_nodes:
                    self.fail(f"{where}.{tag}", f"unknown border node {ref}")
            rate = NEUTRAL_PEERING.rate
            if d.get("rate_mbps") is not None:
                rate = units.mbps(self.num(d, "rate_mbps", where, default=1.0))
            lat = self.num(d, "latency_ms", where, positive=False, required=False, default=0.0)
            prof = LatencyRateProfile(rate, units.ms(lat))
            if src and dst:
                if src.domain == dst.domain:
                    self.fail(where, "peering endpoints must be in different domains")
                else:
                    sc.peering.append(PeeringLink(src, dst, prof))

        for k, d in enumerate(doc.get("flows") or []):
            where = f"flows[{k}]"
            name = d.get("name")
            if not name:
                self.fail(where, "missing field 'name'")
                continue
            lb = LeakyBucketDescriptor(
                units.mbps(self.num(d, "peak_mbps", where, default=1.0)),
                units.mbps(self.num(d, "sustained_mbps", where, default=1.0)),
                units.mbit(self.num(d, "burst_mbit", where, default=1.0)),
            )
            for v in lb.violations():
                self.fail(where, v)
            if name in sc.flows:
                self.fail(where, f"duplicate flow {name!r}")
            sc.flows[name] = lb

        for k, d in enumerate(doc.get("demands") or []):
            dem = self.demand(d, f"demands[{k}]", sc.flows, known_nodes)
            if dem is not None:
                sc.demands.append(dem)

        for k, d in enumerate(doc.get("experiments") or []):
            exp = self.experiment(d, f"experiments[{k}]", sc.flows)
            if exp is not None:
                sc.experiments[exp.figure] = exp

        if self.problems:
            raise ScenarioValidationError([f"{self.origin}: {p}" for p in self.problems])
        return sc

    def ref(self, text: Any, where: str) -> BorderNodeId | None:
        if not isinstance(text, str) or not text:
            self.fail(where, f"expected a node reference, got {text!r}")
            return None
        if ":" in text:
            dom, lab = text.split(":", 1)
            return BorderNodeId(None if dom in ("", "*") else dom, lab)
        return BorderNodeId(None, text)

    def domain(self, d: dict, where: str) -> CapabilityMatrix | None:
        name = d.get("name")
        if not name:
            self.fail(where, "missing field 'name'")
            return None
        labels = [str(x) for x in d.get("nodes") or []]
        entries = {}
        for k, e in enumerate(d.get("links") or []):
            lw = f"{where}.links[{k}]"
            i, j = str(e.get("from")), str(e.get("to"))
            rate = self.num(e, "rate_mbps", lw, positive=False, default=0.0)
            lat = self.num(e, "latency_ms", lw, positive=False, default=0.0)
            if (i, j) in entries:
                self.fail(lw, f"duplicate entry ({i},{j})")
            entries[(i, j)] = LatencyRateProfile(units.mbps(rate), units.ms(lat))
        m = CapabilityMatrix.build(str(name), labels, entries)
        for v in validate_matrix(m):
            self.fail(where, v)
        return m

    def demand(self, d, where, flows, known_nodes) -> DemandProfile | None:
        flow = d.get("flow")
        if flow not in flows:
            self.fail(f"{where}.flow", f"unknown flow {flow!r}")
            return None
        src = self.ref(d.get("source"), f"{where}.source")
        dst = self.ref(d.get("destination"), f"{where}.destination")
        for ref, tag in ((src, "source"), (dst, "destination")):
            if ref is not None and not any(ref.matches(n) for n in known_nodes):
                self.fail(f"{where}.{tag}", f"unknown border node {ref}")
        t = self.num(d, "throughput_mbps", where, required=False)
        dl = self.num(d, "delay_ms", where, required=False)
        if t is None and dl is None:
            self.fail(where, "needs throughput_mbps or delay_ms")
        if src is None or dst is None:
            return None
        return DemandProfile(
            src,
            dst,
            flows[flow],
            throughput=None if t is None else units.mbps(t),
            delay=None if dl is None else units.ms(dl),
            name=str(d.get("name", f"demand{where}")),
        )

    def experiment(self, d, where, flows) -> Experiment | None:
        fig = d.get("figure")
        if fig not in FIGURES:
            self.fail(f"{where}.figure", f"unsupported figure {fig!r}")
            return None
        base = default_experiment(fig)
        kw: dict[str, Any] = {}
        if "flows" in d:
            names = tuple(d["flows"] or ())
            missing = [n for n in names if n not in flows]
            if missing or not names:
                self.fail(f"{where}.flows", f"unknown or empty flow list {list(names)!r}")
            kw["flows"] = names
        if "theta_ms" in d:
            kw["theta_ms"] = self.num(d, "theta_ms", where, positive=False)
        delay = d.get("delay_ms")
        if isinstance(delay, dict):
            kw["delay_ms"] = self.sweep(delay, f"{where}.delay_ms")
        elif delay is not None:
            kw["fixed_delay_ms"] = self.num(d, "delay_ms", where)
        doms = d.get("domains")
        if isinstance(doms, dict):
            lo, hi = doms.get("start"), doms.get("stop")
            if not (isinstance(lo, int) and isinstance(hi, int) and 1 <= lo <= hi):
                self.fail(f"{where}.domains", "range needs integer 1 <= start <= stop")
            else:
                kw["domain_range"] = (lo, hi)
        elif doms is not None:
            if not isinstance(doms, int) or doms < 1:
                self.fail(f"{where}.domains", f"must be a positive integer, got {doms!r}")
            else:
                kw["domains"] = doms
        if "latency_scope" in d:
            if d["latency_scope"] not in ("domain", "path"):
                self.fail(f"{where}.latency_scope", "must be 'domain' or 'path'")
            else:
                kw["latency_scope"] = d["latency_scope"]
        part = d.get("partition") or {"kind": "equal"}
        if part.get("kind") == "explicit":
            w = part.get("weights") or []
            if not w or any(not isinstance(x, (int, float)) or x <= 0 for x in w):
                self.fail(f"{where}.partition", "explicit partition needs positive weights")
            else:
                kw["weights"] = tuple(float(x) for x in w)
        elif part.get("kind") != "equal":
            self.fail(f"{where}.partition", f"unknown kind {part.get('kind')!r}")
        return Experiment(**{**base.__dict__, **kw})

    def sweep(self, d: dict, where: str) -> Sweep:
        start = self.num(d, "start", where, default=1.0)
        stop = self.num(d, "stop", where, default=1.0)
        step = self.num(d, "step", where, default=1.0)
        if start is not None and stop is not None and stop < start:
            self.fail(where, f"stop {stop!r} is before start {start!r}")
        return Sweep(start, stop, step)
