"""Demand profiles, effective bandwidth and delay bounds for leaky-bucket flows."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .curves import UNBOUNDED, LatencyRateProfile, LeakyBucketDescriptor
from .domains import BorderNodeId

# absolute slack (seconds) for regime boundary comparisons
BOUNDARY_SLACK = 1e-12


class InfeasibleDemand(ValueError):
    """No finite capacity meets the requested delay ceiling."""


class Regime(enum.Enum):
    SUSTAINED = "sustained-rate"
    INTERIOR = "interior"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class EffectiveBandwidthResult:
    regime: Regime
    rate: float | None
    d_min: float
    d_max: float

    @property
    def feasible(self) -> bool:
        return self.regime is not Regime.INFEASIBLE


@dataclass(frozen=True)
class DemandProfile:
    """A user request: endpoints, QoS targets and the flow's load descriptor.

    At least one of ``throughput`` (bits/s floor) and ``delay`` (seconds
    ceiling) must be given.
    """

    source: BorderNodeId
    destination: BorderNodeId
    load: LeakyBucketDescriptor
    throughput: float | None = None
    delay: float | None = None
    name: str = ""

    def violations(self) -> list[str]:
        out = list(self.load.violations())
        if self.throughput is None and self.delay is None:
            out.append("demand needs a throughput floor or a delay ceiling")
        if self.throughput is not None and not (
            math.isfinite(self.throughput) and self.throughput > 0
        ):
            out.append(f"throughput must be > 0, got {self.throughput!r}")
        if self.delay is not None and not (math.isfinite(self.delay) and self.delay > 0):
            out.append(f"delay must be > 0, got {self.delay!r}")
        return out

    def require_valid(self) -> DemandProfile:
        problems = self.violations()
        if problems:
            raise ValueError("invalid demand: " + "; ".join(problems))
        return self


def min_available_bandwidth(profile: LatencyRateProfile) -> float:
    """Long-run capacity of a latency-rate profile, which is just its rate."""
    return profile.require_valid().rate


def throughput_feasible(profile: LatencyRateProfile, t_req: float) -> bool:
    if not t_req > 0:
        raise ValueError(f"throughput requirement must be > 0, got {t_req!r}")
    return min_available_bandwidth(profile) >= t_req


def effective_bandwidth(
    load: LeakyBucketDescriptor, theta: float, d_req: float
) -> EffectiveBandwidthResult:
    """Minimum service rate that keeps ``load`` under ``d_req`` on a path of latency ``theta``.

    Three regimes: below ``theta`` nothing works; past
    ``theta + sigma/rho`` the sustained rate suffices; in between the rate
    is ``p sigma / ((d_req - theta)(p - rho) + sigma)``.
    """
    load.require_valid()
    if not d_req > 0:
        raise ValueError(f"delay requirement must be > 0, got {d_req!r}")
    if not (math.isfinite(theta) and theta >= 0):
        raise ValueError(f"latency must be finite and >= 0, got {theta!r}")
    p, rho, sigma = load.peak, load.sustained, load.burst
    d_min = theta
    d_max = theta + sigma / rho

    if d_req < d_min - BOUNDARY_SLACK:
        return EffectiveBandwidthResult(Regime.INFEASIBLE, None, d_min, d_max)
    if load.is_constant_rate or d_req > d_max + BOUNDARY_SLACK:
        return EffectiveBandwidthResult(Regime.SUSTAINED, rho, d_min, d_max)
    slack = max(d_req - theta, 0.0)
    rate = p * sigma / (slack * (p - rho) + sigma)
    return EffectiveBandwidthResult(Regime.INTERIOR, min(max(rate, rho), p), d_min, d_max)


def delay_bound_lr(load: LeakyBucketDescriptor, profile: LatencyRateProfile) -> float:
    """Worst-case delay of a leaky-bucket flow through a latency-rate server.

    Returns :data:`~sdp_sim.curves.UNBOUNDED` when the rate is below the
    flow's sustained rate.
    """
    load.require_valid()
    profile.require_valid()
    p, rho, sigma = load.peak, load.sustained, load.burst
    r, theta = profile.rate, profile.latency
    if r < rho:
        return UNBOUNDED
    if load.is_constant_rate or r >= p:
        return theta
    return theta + sigma * (p - r) / (r * (p - rho))


def min_capacity(demand: DemandProfile, theta: float) -> float:
    """Smallest rate meeting every QoS target of ``demand`` on a path of latency ``theta``.

    Raises :class:`InfeasibleDemand` if the delay ceiling is below ``theta``.
    """
    demand.require_valid()
    terms = []
    if demand.throughput is not None:
        terms.append(demand.throughput)
    if demand.delay is not None:
        eb = effective_bandwidth(demand.load, theta, demand.delay)
        if not eb.feasible:
            raise InfeasibleDemand(
                f"delay ceiling {demand.delay!r}s is below path latency {theta!r}s"
            )
        terms.append(eb.rate)
    return max(terms)
