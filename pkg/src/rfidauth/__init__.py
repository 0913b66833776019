"""Discrete-event simulator and protocol library for symmetric-key RFID authentication."""

from .crypto import Key128, Prng, PrngState, aes128_decrypt, aes128_encrypt, compute_token, prng_next, verify_token
from .engine import Metrics, RunResult, Simulator, Trace, metrics_from_trace, power_check, run_scenario
from .reader import Keystore, Verdict, inventory_next
from .scenario import Scenario, parse_scenario
from .tag import Tag, TagConfig, tag_session_reset, tag_step
from .timing import PowerModel, TimingModel, frame_airtime
from .wire import decode_frame, encode_frame, matches_prefix

__all__ = [
    "Key128",
    "Keystore",
    "Metrics",
    "PowerModel",
    "Prng",
    "PrngState",
    "RunResult",
    "Scenario",
    "Simulator",
    "Tag",
    "TagConfig",
    "TimingModel",
    "Trace",
    "Verdict",
    "aes128_decrypt",
    "aes128_encrypt",
    "compute_token",
    "decode_frame",
    "encode_frame",
    "frame_airtime",
    "inventory_next",
    "matches_prefix",
    "metrics_from_trace",
    "parse_scenario",
    "power_check",
    "prng_next",
    "run_scenario",
    "tag_session_reset",
    "tag_step",
    "verify_token",
]

__version__ = "0.1.0"
