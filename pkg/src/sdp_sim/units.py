"""Unit conversion helpers.

Everything inside the library is bits, seconds and bits/second. The
scenario layer speaks Mbps / ms / Mbit and converts on ingestion.
"""

MEGA = 1_000_000


def mbps(x: float) -> float:
    return x * MEGA


def mbit(x: float) -> float:
    return x * MEGA


def ms(x: float) -> float:
    return x / 1000


def to_mbps(bps: float) -> float:
    return bps / MEGA


def to_ms(seconds: float) -> float:
    return seconds * 1000
