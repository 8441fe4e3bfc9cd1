import pytest

from sdp_sim.curves import LatencyRateProfile, LeakyBucketDescriptor
from sdp_sim.units import mbit, mbps, ms

F1 = LeakyBucketDescriptor(mbps(60), mbps(1.5), mbit(1.04))
F2 = LeakyBucketDescriptor(mbps(15), mbps(1.5), mbit(9.54))
CBR = LeakyBucketDescriptor(mbps(1.5), mbps(1.5), mbit(1.04))

# Frozen from exact rational evaluation of p*sigma/((D - theta)(p - rho) + sigma)
# and cross-checked against a 2M-point brute-force sup of L(s)/(s + D - theta).
R1_E_100MS = 12151898.734177215  # f1, theta_e = 30 ms, D = 100 ms
R2_E_100MS = 13648068.669527898  # f2, theta_e = 30 ms, D = 100 ms


@pytest.fixture
def f1():
    return F1


@pytest.fixture
def f2():
    return F2


def lr(rate_mbps, latency_ms):
    return LatencyRateProfile(mbps(rate_mbps), ms(latency_ms))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
