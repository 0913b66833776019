"""Timing and power parameters shared by the tag, reader and engine.

All times are integer microseconds.  The defaults are plausible HF-RFID
magnitudes, not measured values; they are chosen so that one AES computation
(10 ms) overruns the 2 ms reply deadline.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .wire import Frame, encode_frame


class Direction(Enum):
    READER_TO_TAG = "reader"
    TAG_TO_READER = "tag"


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class TimingModel:
    reader_bits_per_sec: int = 26_700
    tag_bits_per_sec: int = 26_700
    frame_overhead_us: int = 300
    tag_clock_hz: int = 100_000
    aes_cycles: int = 1000
    reply_deadline_us: int = 2000

    def __post_init__(self):
        for name in ("reader_bits_per_sec", "tag_bits_per_sec", "tag_clock_hz", "reply_deadline_us"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        # a zero-cycle cipher is allowed so the no-latency corner can be expressed
        for name in ("frame_overhead_us", "aes_cycles"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")

    @property
    def aes_latency_us(self) -> int:
        return _ceil_div(self.aes_cycles * 1_000_000, self.tag_clock_hz)

    def bits_per_sec(self, direction: Direction) -> int:
        if direction is Direction.READER_TO_TAG:
            return self.reader_bits_per_sec
        return self.tag_bits_per_sec


def airtime_for_length(nbytes: int, direction: Direction, timing: TimingModel) -> int:
    return timing.frame_overhead_us + _ceil_div(8 * nbytes * 1_000_000, timing.bits_per_sec(direction))


def frame_airtime(f: Frame | bytes, direction: Direction, timing: TimingModel) -> int:
    """Air time of one transmission: overhead plus serialization at the link rate."""
    raw = f if isinstance(f, (bytes, bytearray)) else encode_frame(f)
    return airtime_for_length(len(raw), direction, timing)


@dataclass(frozen=True)
class PowerModel:
    """Piecewise-constant tag current per phase, in microamperes."""

    idle_current_uA: float = 1.0
    rx_current_uA: float = 3.0
    tx_current_uA: float = 5.0
    compute_current_uA: float = 8.0
    budget_uA: float = 10.0

    def __post_init__(self):
        for name in ("idle_current_uA", "rx_current_uA", "tx_current_uA", "compute_current_uA", "budget_uA"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
                raise ValueError(f"{name} must be a non-negative number, got {v!r}")

    def current(self, phase: str) -> float:
        return getattr(self, f"{phase}_current_uA")
