"""End-to-end versus per-domain effective-bandwidth allocation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .curves import LatencyRateProfile, LeakyBucketDescriptor
from .domains import compose_chain
from .qos import InfeasibleDemand, Regime, effective_bandwidth


@dataclass(frozen=True)
class PartitionPolicy:
    """How an end-to-end delay target is split into per-domain budgets."""

    kind: str = "equal"
    budgets: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("equal", "explicit"):
            raise ValueError(f"unknown partition kind {self.kind!r}")
        if self.kind == "explicit":
            if not self.budgets:
                raise ValueError("explicit partition needs budgets")
            if any(not b > 0 for b in self.budgets):
                raise ValueError("every budget must be > 0")
            object.__setattr__(self, "budgets", tuple(self.budgets))

    @classmethod
    def explicit(cls, budgets: Sequence[float]) -> PartitionPolicy:
        return cls("explicit", tuple(budgets))

    def split(self, d_e: float, n: int) -> list[float]:
        if self.kind == "equal":
            return [d_e / n] * n
        if len(self.budgets) != n:
            raise ValueError(f"{len(self.budgets)} budgets for {n} domains")
        if not math.isclose(math.fsum(self.budgets), d_e, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"budgets sum to {math.fsum(self.budgets)!r}, not {d_e!r}")
        return list(self.budgets)


EQUAL = PartitionPolicy()


@dataclass(frozen=True)
class ComparisonRow:
    d_e: float
    r_e: float | None
    r_i: tuple[float | None, ...]
    u: tuple[float | None, ...]

    @property
    def n(self) -> int:
        return len(self.r_i)

    @property
    def feasible(self) -> bool:
        return self.r_e is not None and all(r is not None for r in self.r_i)


def end_to_end_allocation(
    load: LeakyBucketDescriptor, profiles: Sequence[LatencyRateProfile], d_e: float
) -> float:
    """Rate the broker reserves on every domain of the composed path."""
    theta_e = compose_chain(profiles).latency
    eb = effective_bandwidth(load, theta_e, d_e)
    if not eb.feasible:
        raise InfeasibleDemand(f"end-to-end delay {d_e!r}s below path latency {theta_e!r}s")
    return eb.rate


def per_domain_allocation(
    load: LeakyBucketDescriptor,
    profiles: Sequence[LatencyRateProfile],
    d_e: float,
    policy: PartitionPolicy = EQUAL,
) -> list[float]:
    """Rate each domain reserves on its own to meet its slice of the delay target."""
    rates = []
    for i, (prof, budget) in enumerate(zip(profiles, policy.split(d_e, len(profiles)))):
        eb = effective_bandwidth(load, prof.latency, budget)
        if not eb.feasible:
            raise InfeasibleDemand(
                f"domain {i}: budget {budget!r}s below latency {prof.latency!r}s"
            )
        rates.append(eb.rate)
    return rates


def bandwidth_ratio(
    load: LeakyBucketDescriptor,
    profiles: Sequence[LatencyRateProfile],
    d_e: float,
    policy: PartitionPolicy = EQUAL,
) -> list[float]:
    r_e = end_to_end_allocation(load, profiles, d_e)
    return [r_i / r_e for r_i in per_domain_allocation(load, profiles, d_e, policy)]


def equal_split_ratio(load: LeakyBucketDescriptor, n: int, theta: float, d: float) -> float:
    """Closed form of the ratio for n identical domains with budget ``d`` each.

    Valid only while both allocations sit in the interior regime.
    """
    x = (d - theta) * (load.peak - load.sustained)
    return 1 + (n - 1) * x / (x + load.burst)


def compare(
    load: LeakyBucketDescriptor,
    profiles: Sequence[LatencyRateProfile],
    d_e: float,
    policy: PartitionPolicy = EQUAL,
) -> ComparisonRow:
    """Both allocations for one delay target; infeasible parts come back as ``None``."""
    try:
        r_e = end_to_end_allocation(load, profiles, d_e)
    except InfeasibleDemand:
        r_e = None
    r_i = []
    for prof, budget in zip(profiles, policy.split(d_e, len(profiles))):
        eb = effective_bandwidth(load, prof.latency, budget)
        r_i.append(eb.rate)
    u = tuple(None if r_e is None or r is None else r / r_e for r in r_i)
    return ComparisonRow(d_e, r_e, tuple(r_i), u)


@dataclass(frozen=True)
class LooseDelayReport:
    d_e: float
    d_e_max: float
    d_i: tuple[float, ...]
    d_i_max: tuple[float, ...]
    end_to_end_regime: Regime
    per_domain_regimes: tuple[Regime, ...]
    r_e: float | None
    r_i: tuple[float | None, ...]

    @property
    def broker_charges_sustained_only(self) -> bool:
        """End-to-end is loose (rate = rho) while some domain still pays more."""
        return self.end_to_end_regime is Regime.SUSTAINED and any(
            r is not None and r > self.r_e for r in self.r_i
        )

    @property
    def regimes_coincide(self) -> bool:
        return all(reg is self.end_to_end_regime for reg in self.per_domain_regimes)


def loose_delay_analysis(
    load: LeakyBucketDescriptor,
    profiles: Sequence[LatencyRateProfile],
    d_e: float,
    policy: PartitionPolicy = EQUAL,
) -> LooseDelayReport:
    theta_e = compose_chain(profiles).latency
    e2e = effective_bandwidth(load, theta_e, d_e)
    budgets = policy.split(d_e, len(profiles))
    per = [effective_bandwidth(load, p.latency, b) for p, b in zip(profiles, budgets)]
    return LooseDelayReport(
        d_e=d_e,
        d_e_max=e2e.d_max,
        d_i=tuple(budgets),
        d_i_max=tuple(eb.d_max for eb in per),
        end_to_end_regime=e2e.regime,
        per_domain_regimes=tuple(eb.regime for eb in per),
        r_e=e2e.rate,
        r_i=tuple(eb.rate for eb in per),
    )
