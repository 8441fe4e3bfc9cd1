"""Piecewise-linear curves and the min-plus operations used on them.

A :class:`Curve` is a continuous, nondecreasing, piecewise-linear function
on ``t >= 0`` stored as breakpoints ``(t, value, slope)``; past the last
breakpoint the last segment extends linearly. Arrival curves and service
curves share this representation.

Two closed-form building blocks live here as well: the latency-rate
service profile ``max{0, r (t - theta)}`` and the leaky-bucket arrival
curve ``min{p t, sigma + rho t}``. The grid routines
(:func:`convolve_numeric`, :func:`horizontal_deviation`) only ever
*evaluate* curves, so they serve as an oracle for the closed forms in
:mod:`sdp_sim.qos`.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

#: Returned by delay computations when the capacity never catches the load.
UNBOUNDED = math.inf

DEFAULT_STEP = 1e-4
HORIZON_MARGIN = 0.2

# relative slack for value comparisons on curves measured in bits
_REL_TOL = 1e-9


@dataclass(frozen=True)
class Breakpoint:
    t: float
    value: float
    slope: float


class Curve:
    """Immutable nondecreasing piecewise-linear curve."""

    __slots__ = ("_points", "_times")

    def __init__(self, points: Iterable[tuple[float, float, float] | Breakpoint]):
        pts = tuple(
            p if isinstance(p, Breakpoint) else Breakpoint(*map(float, p))
            for p in points
        )
        _check_points(pts)
        object.__setattr__(self, "_points", pts)
        object.__setattr__(self, "_times", tuple(p.t for p in pts))

    def __setattr__(self, name, value):
        raise AttributeError("Curve is immutable")

    @property
    def points(self) -> tuple[Breakpoint, ...]:
        return self._points

    @property
    def final_slope(self) -> float:
        return self._points[-1].slope

    def __call__(self, t: float) -> float:
        return evaluate(self, t)

    def __eq__(self, other):
        return isinstance(other, Curve) and self._points == other._points

    def __hash__(self):
        return hash(self._points)

    def __repr__(self):
        body = ", ".join(f"({p.t!r}, {p.value!r}, {p.slope!r})" for p in self._points)
        return f"Curve([{body}])"

    def sample(self, times: np.ndarray) -> np.ndarray:
        """Vectorised evaluation; ``times`` must be nonnegative."""
        times = np.asarray(times, dtype=float)
        if times.size and (times.min() < 0 or not np.all(np.isfinite(times))):
            raise ValueError("sample times must be finite and >= 0")
        starts = np.array(self._times)
        idx = np.searchsorted(starts, times, side="right") - 1
        values = np.array([p.value for p in self._points])
        slopes = np.array([p.slope for p in self._points])
        return values[idx] + slopes[idx] * (times - starts[idx])

    def is_convex(self) -> bool:
        slopes = [p.slope for p in self._points]
        return all(a <= b for a, b in zip(slopes, slopes[1:]))

    def is_concave(self) -> bool:
        slopes = [p.slope for p in self._points]
        return all(a >= b for a, b in zip(slopes, slopes[1:]))

    @classmethod
    def zero(cls) -> Curve:
        return cls([(0.0, 0.0, 0.0)])

    @classmethod
    def from_samples(cls, times: Sequence[float], values: Sequence[float]) -> Curve:
        """Linear interpolation through samples, dropping collinear points.

        The final segment's slope is carried on as the linear extension.
        """
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if len(times) < 2:
            raise ValueError("need at least two samples")
        slopes = np.diff(values) / np.diff(times)
        slopes = np.maximum(slopes, 0.0)
        pts = [(times[0], values[0], slopes[0])]
        scale = max(1.0, float(np.max(np.abs(slopes))))
        for k in range(1, len(slopes)):
            if abs(slopes[k] - pts[-1][2]) > 1e-9 * scale:
                pts.append((times[k], values[k], slopes[k]))
        # rebuild values from slopes so the continuity check is exact
        fixed = [pts[0]]
        for t, _, s in pts[1:]:
            pt, pv, ps = fixed[-1]
            fixed.append((t, pv + ps * (t - pt), s))
        return cls(fixed)


def _check_points(pts: tuple[Breakpoint, ...]) -> None:
    if not pts:
        raise ValueError("curve needs at least one breakpoint")
    if pts[0].t != 0.0:
        raise ValueError("first breakpoint must be at t = 0")
    for p in pts:
        if not all(math.isfinite(x) for x in (p.t, p.value, p.slope)):
            raise ValueError(f"non-finite breakpoint {p}")
        if p.slope < 0:
            raise ValueError(f"negative slope at t={p.t}")
    if pts[0].value < 0:
        raise ValueError("curve value at t = 0 must be >= 0")
    for a, b in zip(pts, pts[1:]):
        if b.t <= a.t:
            raise ValueError("breakpoint times must be strictly increasing")
        expected = a.value + a.slope * (b.t - a.t)
        if abs(b.value - expected) > _REL_TOL * max(1.0, abs(expected)):
            raise ValueError(f"discontinuity at t={b.t}: {b.value} != {expected}")


def evaluate(curve: Curve, t: float) -> float:
    """Value of ``curve`` at time ``t`` (seconds)."""
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"t must be finite and >= 0, got {t!r}")
    k = bisect.bisect_right(curve._times, t) - 1
    p = curve._points[k]
    if t == p.t:
        return p.value
    return p.value + p.slope * (t - p.t)


@dataclass(frozen=True)
class LatencyRateProfile:
    """Service profile ``max{0, rate * (t - latency)}``.

    ``rate`` may be ``math.inf`` for links that are never the bottleneck
    (the default inter-domain peering profile); such profiles compose but
    cannot be rendered as a :class:`Curve`.
    """

    rate: float
    latency: float = 0.0

    def violations(self) -> list[str]:
        out = []
        if not (self.rate > 0):
            out.append(f"rate must be > 0, got {self.rate!r}")
        if not (math.isfinite(self.latency) and self.latency >= 0):
            out.append(f"latency must be finite and >= 0, got {self.latency!r}")
        return out

    def require_valid(self) -> LatencyRateProfile:
        problems = self.violations()
        if problems:
            raise ValueError("invalid latency-rate profile: " + "; ".join(problems))
        return self

    def as_curve(self) -> Curve:
        self.require_valid()
        if not math.isfinite(self.rate):
            raise ValueError("an infinite-rate profile has no curve rendering")
        if self.latency == 0:
            return Curve([(0.0, 0.0, self.rate)])
        return Curve([(0.0, 0.0, 0.0), (self.latency, 0.0, self.rate)])


@dataclass(frozen=True)
class LeakyBucketDescriptor:
    """Arrival curve ``min{peak * t, burst + sustained * t}``."""

    peak: float
    sustained: float
    burst: float

    def violations(self) -> list[str]:
        out = []
        for name in ("peak", "sustained", "burst"):
            v = getattr(self, name)
            if not math.isfinite(v):
                out.append(f"{name} must be finite, got {v!r}")
        if not self.sustained > 0:
            out.append(f"sustained rate must be > 0, got {self.sustained!r}")
        if not self.peak >= self.sustained:
            out.append(
                f"peak rate {self.peak!r} must be >= sustained rate {self.sustained!r}"
            )
        if not self.burst > 0:
            out.append(f"burst must be > 0, got {self.burst!r}")
        return out

    def require_valid(self) -> LeakyBucketDescriptor:
        problems = self.violations()
        if problems:
            raise ValueError("invalid leaky-bucket descriptor: " + "; ".join(problems))
        return self

    @property
    def is_constant_rate(self) -> bool:
        return self.peak == self.sustained

    @property
    def burst_time(self) -> float:
        """Time at which the peak-rate branch meets the sustained branch."""
        if self.is_constant_rate:
            return math.inf
        return self.burst / (self.peak - self.sustained)

    def as_curve(self) -> Curve:
        self.require_valid()
        if self.is_constant_rate:
            return Curve([(0.0, 0.0, self.peak)])
        knee = self.burst_time
        return Curve([(0.0, 0.0, self.peak), (knee, self.peak * knee, self.sustained)])


def convolve_lr(a: LatencyRateProfile, b: LatencyRateProfile) -> LatencyRateProfile:
    """Closed-form min-plus convolution of two latency-rate profiles."""
    a.require_valid()
    b.require_valid()
    return LatencyRateProfile(min(a.rate, b.rate), a.latency + b.latency)


def _grid(horizon: float, step: float) -> np.ndarray:
    if not (math.isfinite(horizon) and horizon > 0):
        raise ValueError(f"horizon must be finite and > 0, got {horizon!r}")
    if not (math.isfinite(step) and 0 < step <= horizon):
        raise ValueError(f"step must satisfy 0 < step <= horizon, got {step!r}")
    n = int(math.floor(horizon / step + 1e-9))
    return np.arange(n + 1) * step


def convolve_numeric(a: Curve, b: Curve, horizon: float, step: float = DEFAULT_STEP) -> Curve:
    """Brute-force inf-convolution sampled on ``{0, step, ..., horizon}``.

    ``(a * b)(t_k) = min_j a(t_k - t_j) + b(t_j)``. Quadratic in the number
    of grid points; meant as a check, not as a production path.
    """
    t = _grid(horizon, step)
    av = a.sample(t)
    bv = b.sample(t)
    out = np.full_like(av, np.inf)
    for j in range(len(t)):
        np.minimum(out[j:], av[: len(t) - j] + bv[j], out=out[j:])
    return Curve.from_samples(t, out)


def busy_period_horizon(
    load: LeakyBucketDescriptor, profile: LatencyRateProfile, margin: float = HORIZON_MARGIN
) -> float:
    """Default oracle horizon: ``(theta + sigma / (r - rho)) * (1 + margin)``.

    Only defined when the service rate exceeds the sustained rate.
    """
    if not profile.rate > load.sustained:
        raise ValueError("busy period is unbounded when rate <= sustained rate; pass a horizon")
    return (profile.latency + load.burst / (profile.rate - load.sustained)) * (1 + margin)


def _generic_horizon(load: Curve, capacity: Curve) -> float:
    # both curves are affine past t0; find where capacity overtakes load
    t0 = max(load.points[-1].t, capacity.points[-1].t)
    gap = evaluate(load, t0) - evaluate(capacity, t0)
    extra = 0.0
    if gap > 0:
        extra = gap / (capacity.final_slope - load.final_slope)
    return max(t0 + extra, DEFAULT_STEP) * (1 + HORIZON_MARGIN)


def horizontal_deviation(
    load: Curve,
    capacity: Curve,
    horizon: float | None = None,
    step: float = DEFAULT_STEP,
) -> float:
    """Grid estimate of ``sup_t inf{d >= 0 : load(t) <= capacity(t + d)}``.

    Both ``t`` and ``t + d`` are restricted to the grid, so the result is
    within one ``step`` of the exact deviation provided ``horizon`` covers
    the point where the supremum is attained. Returns :data:`UNBOUNDED`
    when the capacity's long-run slope is below the load's, or when the
    capacity never reaches the load within a generous search window.
    """
    if capacity.final_slope < load.final_slope:
        return UNBOUNDED
    if horizon is None:
        if capacity.final_slope == load.final_slope:
            raise ValueError("equal long-run slopes: a horizon must be supplied")
        horizon = _generic_horizon(load, capacity)
    t = _grid(horizon, step)
    demand = load.sample(t)
    peak = float(demand[-1])

    reach = horizon
    for _ in range(12):
        if evaluate(capacity, reach) >= peak:
            break
        reach *= 2
    else:
        return UNBOUNDED
    u = _grid(reach + step, step)
    supply = capacity.sample(u)
    slack = _REL_TOL * max(1.0, peak)
    k = np.searchsorted(supply, demand - slack, side="left")
    if k.max() >= len(u):
        return UNBOUNDED
    delays = np.maximum(u[k] - t, 0.0)
    return float(delays.max())
