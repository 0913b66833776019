"""Deterministic virtual-time discrete-event engine.

One reader process (a generator, see :mod:`rfidauth.channel`) shares a radio
channel with any number of transponders.  Time is integer microseconds and
every action is ordered by ``(time, insertion sequence)`` so a run is a pure
function of its inputs.
"""

from __future__ import annotations

import heapq
from bisect import bisect_left, bisect_right
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

from .channel import (
    Collision,
    Exchange,
    Garbled,
    Mark,
    Record,
    Send,
    Single,
    WaitUntil,
    channel_resolve,
)
from .crypto import Prng, PrngState
from .reader import (
    Verdict,
    authenticate_interleaved,
    authenticate_mutual_all,
    authenticate_sequential,
    run_inventory,
)
from .scenario import Scenario
from .tag import Tag
from .timing import Direction, PowerModel, TimingModel, frame_airtime
from .wire import (
    Busy,
    FrameError,
    Inventory,
    StayQuiet,
    decode_frame,
    encode_frame,
)

TX_START = "TxStart"
TX_END = "TxEnd"
RX_DELIVER = "RxDeliver"
STATE_CHANGE = "StateChange"
VERDICT = "Verdict"

READER = "reader"


@dataclass(frozen=True)
class SimEvent:
    time_us: int
    actor: str
    kind: str
    detail: str

    def line(self) -> str:
        return f"{self.time_us} {self.actor} {self.kind} {self.detail}"


class Trace(list):
    """Ordered list of :class:`SimEvent` with a byte-stable text form."""

    def serialize(self) -> str:
        return "".join(e.line() + "\n" for e in self)

    @classmethod
    def parse(cls, text: str) -> "Trace":
        events = cls()
        for line in text.splitlines():
            t, actor, kind, detail = line.split(" ", 3)
            events.append(SimEvent(int(t), actor, kind, detail))
        return events

    @property
    def end_time(self) -> int:
        return self[-1].time_us if self else 0


class Simulator:
    """Runs a reader process against a set of transponders.

    A transponder needs an ``actor`` label and a
    ``receive(frame, now, timing)`` method returning a
    :class:`rfidauth.tag.TagStep`-shaped tuple.
    """

    def __init__(self, transponders: Iterable, timing: TimingModel):
        self.transponders = list(transponders)
        self.timing = timing
        self.now = 0
        self.trace = Trace()
        self._queue: list = []
        self._seq = 0
        self._process = None
        self._result = None

    # -- queue plumbing
    def _at(self, time_us: int, action: Callable, arg=None) -> None:
        heapq.heappush(self._queue, (time_us, self._seq, action, arg))
        self._seq += 1

    def _log(self, actor: str, kind: str, detail: str) -> None:
        self.trace.append(SimEvent(self.now, actor, kind, detail))

    def run(self, process):
        """Drive ``process`` to completion and return its return value."""
        self._process = process
        self._at(self.now, self._resume)
        while self._queue:
            time_us, _, action, arg = heapq.heappop(self._queue)
            self.now = time_us
            action(arg)
        return self._result

    def _resume(self, value) -> None:
        while True:
            try:
                req = self._process.send(value)
            except StopIteration as stop:
                self._result = stop.value
                return
            if isinstance(req, Record):
                self._log(READER, VERDICT, f"{req.tag_id:014x}:{req.verdict}")
                value = None
            elif isinstance(req, Mark):
                self._log(READER, STATE_CHANGE, req.detail)
                value = None
            elif isinstance(req, WaitUntil):
                self._at(max(self.now, req.time_us), self._resume)
                return
            elif isinstance(req, Send):
                self._transmit(req)
                return
            else:
                raise TypeError(f"reader process yielded {req!r}")

    # -- radio
    def _transmit(self, req: Send) -> None:
        raw = encode_frame(req.frame)
        self._log(READER, TX_START, raw.hex())
        air = frame_airtime(raw, Direction.READER_TO_TAG, self.timing)
        self._at(self.now + air, self._deliver, (req, raw))

    def _deliver(self, arg) -> None:
        req, raw = arg
        tx_end = self.now
        self._log(READER, TX_END, raw.hex())
        try:
            frame = decode_frame(raw)
        except FrameError:
            frame = None
        replies = []
        timing, log_state = self.timing, self._log_state
        for tp in self.transponders:
            before = getattr(tp, "state", None)
            step = tp.receive(frame, tx_end, timing)
            if step.state is not before or step.compute_until is not None:
                log_state(tp, before, step)
            if step.reply is not None:
                replies.append((tp, step.reply, step.reply_at if step.reply_at is not None else tx_end))

        raws, window_end = [], None
        for tp, reply, start in replies:
            rraw = bytes(reply) if isinstance(reply, (bytes, bytearray)) else encode_frame(reply)
            end = start + frame_airtime(rraw, Direction.TAG_TO_READER, self.timing)
            self._at(start, self._tag_tx, (tp.actor, TX_START, rraw))
            self._at(end, self._tag_tx, (tp.actor, TX_END, rraw))
            raws.append(rraw)
            window_end = end if window_end is None else max(window_end, end)
        if not req.expect_reply:
            self._resume(Exchange(None, tx_end))
            return
        if window_end is None:
            # nobody answered: the reader listens until the reply deadline
            window_end = tx_end + self.timing.reply_deadline_us
        self._at(window_end, self._resolve, (raws, tx_end))

    def _log_state(self, tp, before, step) -> None:
        after = step.state
        if step.compute_until is not None:
            self._log(tp.actor, STATE_CHANGE, f"computing_until={step.compute_until}")
        if before is None or after is None or after is before:
            return
        if getattr(before, "mode", None) != getattr(after, "mode", None):
            self._log(tp.actor, STATE_CHANGE, f"mode={after.mode.value}")
        if getattr(after, "reader_authenticated", False) and not getattr(before, "reader_authenticated", False):
            self._log(tp.actor, STATE_CHANGE, "reader_authenticated")

    def _tag_tx(self, arg) -> None:
        actor, kind, raw = arg
        self._log(actor, kind, raw.hex())

    def _resolve(self, arg) -> None:
        raws, tx_end = arg
        if len(raws) == 1:
            try:
                outcome = Single(decode_frame(raws[0]))
            except FrameError as exc:
                outcome = Garbled(exc.kind)
        else:
            outcome = channel_resolve(raws)
        if isinstance(outcome, Single):
            detail = raws[0].hex()
        elif isinstance(outcome, Garbled):
            detail = f"garbled:{outcome.kind}"
        elif isinstance(outcome, Collision):
            detail = "collision"
        else:
            detail = "silence"
        self._log(READER, RX_DELIVER, detail)
        self._resume(Exchange(outcome, tx_end))


# -- metrics ---------------------------------------------------------------

@dataclass
class Metrics:
    total_time_us: int = 0
    queries: int = 0
    collisions: int = 0
    stay_quiets: int = 0
    auth_attempts: int = 0
    auth_verified: int = 0
    auth_failed: int = 0
    busy_replies: int = 0
    max_tag_current_uA: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def _opcode(detail: str) -> int | None:
    try:
        return int(detail[:2], 16)
    except ValueError:
        return None


def metrics_from_trace(trace: Trace, power: PowerModel) -> Metrics:
    """Recompute every counter from the trace alone."""
    return _metrics(trace, power_check(trace, power))


def _metrics(trace: Trace, report: "PowerReport") -> Metrics:
    m = Metrics(total_time_us=trace.end_time)
    for e in trace:
        if e.actor == READER:
            if e.kind == TX_START:
                op = _opcode(e.detail)
                if op == Inventory.OPCODE:
                    m.queries += 1
                elif op == StayQuiet.OPCODE:
                    m.stay_quiets += 1
            elif e.kind == RX_DELIVER and e.detail == "collision":
                m.collisions += 1
            elif e.kind == VERDICT:
                m.auth_attempts += 1
                if e.detail.endswith(":" + Verdict.VERIFIED.value):
                    m.auth_verified += 1
                else:
                    m.auth_failed += 1
        elif e.kind == TX_START and _opcode(e.detail) == Busy.OPCODE:
            m.busy_replies += 1
    m.max_tag_current_uA = report.max_current_uA
    return m


# -- power -----------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    actor: str
    start_us: int
    end_us: int
    phase: str
    current_uA: float


@dataclass
class PowerReport:
    max_current_uA: float
    violations: list[Violation] = field(default_factory=list)


def tag_phases(trace: Trace) -> dict[str, list[tuple[int, int, str]]]:
    """Per tag, the merged piecewise-constant phase timeline.

    Priority when phases overlap: tx, compute, rx, idle.  Every tag hears
    every reader transmission.
    """
    end = trace.end_time
    reader_tx, own_tx, compute = [], {}, {}
    open_reader, open_tag = None, {}
    tags = []
    for e in trace:
        if e.actor == READER:
            if e.kind == TX_START:
                open_reader = e.time_us
            elif e.kind == TX_END and open_reader is not None:
                reader_tx.append((open_reader, e.time_us))
                open_reader = None
            continue
        if not e.actor.startswith("tag:"):
            continue
        if e.actor not in own_tx:
            tags.append(e.actor)
            own_tx[e.actor], compute[e.actor] = [], []
        if e.kind == TX_START:
            open_tag[e.actor] = e.time_us
        elif e.kind == TX_END and e.actor in open_tag:
            own_tx[e.actor].append((open_tag.pop(e.actor), e.time_us))
        elif e.kind == STATE_CHANGE and e.detail.startswith("computing_until="):
            spans = compute[e.actor]
            # a newer computation replaces one still in flight
            if spans and spans[-1][1] > e.time_us:
                spans[-1] = (spans[-1][0], e.time_us)
            spans.append((e.time_us, int(e.detail.split("=", 1)[1])))

    # the reader layer is shared, so it is swept once and each tag's own
    # tx and compute spans are spliced over it
    base = _sweep([("rx", reader_tx)], 0, end, keep_idle=True)
    starts = [a for a, _, _ in base]
    result = {}
    for actor in tags:
        top = _sweep([("tx", own_tx[actor]), ("compute", compute[actor])], 0, end, keep_idle=False)
        result[actor] = _overlay(base, starts, top)
    return result


def _sweep(layers, lo: int, hi: int, keep_idle: bool) -> list[tuple[int, int, str]]:
    cuts = {lo, hi}
    for _, spans in layers:
        for a, b in spans:
            cuts.update((min(a, hi), min(b, hi)))
    cuts = sorted(cuts)
    timeline: list[tuple[int, int, str]] = []
    ptr = [0] * len(layers)
    for a, b in zip(cuts, cuts[1:]):
        phase = "idle"
        for k, (name, spans) in enumerate(layers):
            i = ptr[k]
            while i < len(spans) and spans[i][1] <= a:
                i += 1
            ptr[k] = i
            # spans within one layer may overlap only for compute (truncated above)
            if i < len(spans) and spans[i][0] <= a < spans[i][1]:
                phase = name
                break
        if phase == "idle" and not keep_idle:
            continue
        if timeline and timeline[-1][2] == phase and timeline[-1][1] == a:
            timeline[-1] = (timeline[-1][0], b, phase)
        else:
            timeline.append((a, b, phase))
    return timeline


def _overlay(base, starts, top):
    """Lay the segments of ``top`` over the contiguous timeline ``base``."""
    out: list[tuple[int, int, str]] = []
    n = len(base)
    i = pos = 0

    def fill(x):
        # copy base over [pos, x); base[i] is the first segment ending after pos
        nonlocal i
        if i < n and base[i][0] < pos:
            s0, s1, ph = base[i]
            if min(s1, x) > pos:
                out.append((pos, min(s1, x), ph))
            if s1 > x:
                return
            i += 1
        j = bisect_left(starts, x, i)
        if j > i:
            if base[j - 1][1] <= x:
                out.extend(base[i:j])
                i = j
            else:
                out.extend(base[i:j - 1])
                out.append((base[j - 1][0], x, base[j - 1][2]))
                i = j - 1

    for a, b, phase in top:
        fill(a)
        out.append((a, b, phase))
        pos = b
        k = bisect_right(starts, b) - 1
        i = k if k >= 0 and base[k][1] > b else k + 1
    if base:
        fill(base[-1][1])
    return out


def power_check(trace: Trace, power: PowerModel) -> PowerReport:
    """Flag every interval in which a tag draws more than the budget."""
    report = PowerReport(max_current_uA=0.0)
    currents = {phase: power.current(phase) for phase in ("idle", "rx", "tx", "compute")}
    for actor, timeline in tag_phases(trace).items():
        if not timeline:
            report.max_current_uA = max(report.max_current_uA, power.idle_current_uA)
        for phase in {p for _, _, p in timeline}:
            report.max_current_uA = max(report.max_current_uA, currents[phase])
        for a, b, phase in timeline:
            if currents[phase] > power.budget_uA:
                report.violations.append(Violation(actor, a, b, phase, currents[phase]))
    return report


# -- scenarios -------------------------------------------------------------

@dataclass
class RunResult:
    trace: Trace
    metrics: Metrics
    found: list[int]
    verdicts: dict[int, Verdict]
    inventory_time_us: int
    auth_time_us: int
    power: PowerReport


def build_tags(scenario: Scenario) -> list[Tag]:
    # stream 0 is the reader; tag i draws from stream i + 1
    return [Tag(cfg, PrngState.from_seed(scenario.seed, i + 1)) for i, cfg in enumerate(scenario.tags)]


def _scenario_process(scenario: Scenario, rng: Prng):
    yield Mark("phase=inventory")
    found = yield from run_inventory()
    verdicts = {}
    if scenario.mode != "inventory":
        yield Mark("phase=auth")
        keystore, timing = scenario.reader_keystore(), scenario.timing
        if scenario.mode == "seq-auth":
            verdicts = yield from authenticate_sequential(found, keystore, rng, timing, scenario.auth_scheme)
        elif scenario.mode == "interleaved-auth":
            verdicts = yield from authenticate_interleaved(found, keystore, rng, timing)
        else:
            verdicts = yield from authenticate_mutual_all(found, keystore, rng, timing, scenario.auth_scheme)
    yield Mark("phase=done")
    return found, verdicts


def phase_times(trace: Trace) -> tuple[int, int]:
    """(inventory duration, auth duration) read back from the phase markers."""
    marks = {e.detail: e.time_us for e in trace if e.actor == READER and e.detail.startswith("phase=")}
    done = marks.get("phase=done", trace.end_time)
    auth_start = marks.get("phase=auth", done)
    return auth_start - marks.get("phase=inventory", 0), done - auth_start


def run_scenario(scenario: Scenario) -> RunResult:
    """Execute the scenario's mode to completion; deterministic in (scenario, seed)."""
    tags = build_tags(scenario)
    sim = Simulator(tags, scenario.timing)
    for tag in tags:
        sim._log(tag.actor, STATE_CHANGE, f"mode={tag.state.mode.value}")
    found, verdicts = sim.run(_scenario_process(scenario, Prng.from_seed(scenario.seed, 0)))
    trace = sim.trace
    inventory_us, auth_us = phase_times(trace)
    report = power_check(trace, scenario.power)
    return RunResult(
        trace=trace,
        metrics=_metrics(trace, report),
        found=found,
        verdicts=verdicts,
        inventory_time_us=inventory_us,
        auth_time_us=auth_us,
        power=report,
    )
