from pathlib import Path

import pytest

from rfidauth.crypto import Key128
from rfidauth.timing import TimingModel

ROOT = Path(__file__).resolve().parent.parent

# Every frame used in the auth phase (at most 125 bytes) takes exactly 1000 us
# on the air, and one AES run takes 500 cycles / 100 kHz = 5000 us.
WORKED_TIMING = TimingModel(
    reader_bits_per_sec=1_000_000_000,
    tag_bits_per_sec=1_000_000_000,
    frame_overhead_us=999,
    tag_clock_hz=100_000,
    aes_cycles=500,
    reply_deadline_us=2000,
)


def key_for(i: int) -> Key128:
    return Key128(bytes((i + j * 17) & 0xFF for j in range(16)))


@pytest.fixture
def demo_path():
    return ROOT / "scenarios" / "demo3.json"


# -- acceptance reporting: one PASS/FAIL line per criterion

_criteria: dict[int, tuple[str, str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    if report.when == "call" or number not in _criteria:
        _criteria[number] = (title, "PASS" if report.passed else "FAIL", call.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, verdict, seconds = _criteria[number]
        terminalreporter.write_line(f"criterion {number} {verdict}: {title} ({seconds:.1f} s)")
