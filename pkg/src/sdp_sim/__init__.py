"""Network-calculus simulator for a multi-domain SDN service delivery broker."""

__version__ = "0.1.0"

from .curves import (  # noqa: E402
    UNBOUNDED,
    Curve,
    LatencyRateProfile,
    LeakyBucketDescriptor,
    convolve_lr,
    convolve_numeric,
    evaluate,
    horizontal_deviation,
)
from .domains import (  # noqa: E402
    BorderNodeId,
    CapabilityMatrix,
    PeeringLink,
    ServiceChain,
    VirtualLink,
    compose_chain,
    validate_matrix,
)
from .qos import (  # noqa: E402
    DemandProfile,
    EffectiveBandwidthResult,
    InfeasibleDemand,
    Regime,
    delay_bound_lr,
    effective_bandwidth,
    min_available_bandwidth,
    min_capacity,
    throughput_feasible,
)
from .broker import AllocationTicket, ServiceRegistry  # noqa: E402
from .study import (  # noqa: E402
    PartitionPolicy,
    bandwidth_ratio,
    end_to_end_allocation,
    loose_delay_analysis,
    per_domain_allocation,
)
