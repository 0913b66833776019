"""Scripted attackers run against the same engine as honest sessions.

Each attack returns an :class:`AttackResult`.  Trial ``i`` uses a seed drawn
from a counter stream keyed by the master seed, so trials are independent
and reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

from .crypto import Key128, Prng, PrngState
from .engine import READER, RX_DELIVER, TX_START, Simulator, Trace
from .reader import (
    Keystore,
    Verdict,
    authenticate_tag_sequential,
    mutual_authenticate,
    run_inventory,
)
from .channel import Send, Single
from .tag import MEMORY_PAGES, PAGE_SIZE, Tag, TagConfig, TagStep
from .timing import TimingModel
from .wire import (
    ERR_DENIED,
    AuthChallenge,
    AuthRequestAR,
    AuthResponse,
    Error,
    FrameError,
    Inventory,
    MemoryData,
    ReadMemory,
    ReaderAuthToken,
    ResponseRequestRR,
    TagReply,
    decode_frame,
    id_hex,
    matches_prefix,
)

_TRIAL_STREAM = 0xA77AC4


@dataclass
class AttackResult:
    name: str
    trials: int
    successes: int = 0
    notes: dict = field(default_factory=dict)
    samples: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {"name": self.name, "trials": self.trials, "successes": self.successes, "notes": self.notes}
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def trial_seeds(seed: int, trials: int):
    master = Prng.from_seed(seed, _TRIAL_STREAM)
    for _ in range(trials):
        yield master.u64()


class FixedNonce:
    """A broken nonce source that always returns the same value."""

    def __init__(self, nonce: bytes):
        self.value = nonce

    def nonce(self) -> bytes:
        return self.value


# -- bogus transponders ------------------------------------------------------

class ReplayDevice:
    """Answers any challenge for ``claimed_id`` with a previously captured token."""

    def __init__(self, claimed_id: int, token: bytes):
        self.claimed_id = claimed_id
        self.token = token
        self.state = None

    @property
    def actor(self) -> str:
        return f"replay:{id_hex(self.claimed_id)}"

    def receive(self, frame, now, timing):
        if isinstance(frame, Inventory) and matches_prefix(self.claimed_id, frame.prefix_len, frame.prefix_bits):
            return TagStep(None, TagReply(self.claimed_id), now)
        if frame is None or frame.addressed_to != self.claimed_id:
            return TagStep(None)
        if isinstance(frame, (AuthChallenge, ResponseRequestRR)):
            return TagStep(None, AuthResponse(self.token), now)
        return TagStep(None)


class CloneDevice:
    """Carries a copied id but not the key; answers with uniformly random tokens."""

    def __init__(self, claimed_id: int, rng: Prng):
        self.claimed_id = claimed_id
        self.rng = rng
        self.state = None

    @property
    def actor(self) -> str:
        return f"clone:{id_hex(self.claimed_id)}"

    def receive(self, frame, now, timing):
        if isinstance(frame, Inventory):
            if matches_prefix(self.claimed_id, frame.prefix_len, frame.prefix_bits):
                return TagStep(None, TagReply(self.claimed_id), now)
            return TagStep(None)
        if frame is None or frame.addressed_to != self.claimed_id:
            return TagStep(None)
        if isinstance(frame, (AuthChallenge, ResponseRequestRR)):
            token = self.rng.nonce() + self.rng.nonce()
            return TagStep(None, AuthResponse(token), now)
        return TagStep(None)


# -- helpers -----------------------------------------------------------------

@dataclass(frozen=True)
class Capture:
    tag_id: int
    nonce: bytes
    token: bytes


def captured_responses(trace: Trace) -> list[Capture]:
    """Reader-side view of the trace: every (id, challenge nonce, token) seen."""
    nonces: dict[int, bytes] = {}
    current = None
    out = []
    for e in trace:
        if e.actor != READER or e.kind not in (TX_START, RX_DELIVER):
            continue
        try:
            frame = decode_frame(bytes.fromhex(e.detail))
        except (ValueError, FrameError):
            continue
        if e.kind == TX_START:
            if isinstance(frame, (AuthChallenge, AuthRequestAR)):
                nonces[frame.tag_id] = frame.nonce
            if isinstance(frame, (AuthChallenge, ResponseRequestRR)):
                current = frame.tag_id
        elif isinstance(frame, AuthResponse) and current in nonces:
            out.append(Capture(current, nonces[current], frame.token))
    return out


def captured_frames(trace: Trace, kind: type) -> list:
    out = []
    for e in trace:
        if e.kind != TX_START:
            continue
        try:
            frame = decode_frame(bytes.fromhex(e.detail))
        except (ValueError, FrameError):
            continue
        if isinstance(frame, kind):
            out.append(frame)
    return out


def transcript_leaks_key(trace: Trace, keys) -> bool:
    """True if any 16-byte window of any transmitted frame equals a key."""
    secrets = {k.bytes if isinstance(k, Key128) else bytes(k) for k in keys}
    for e in trace:
        try:
            raw = bytes.fromhex(e.detail)
        except ValueError:
            continue
        for i in range(len(raw) - 15):
            if raw[i:i + 16] in secrets:
                return True
    return False


def _inventory_then_auth(keystore, rng, timing, scheme):
    found = yield from run_inventory()
    verdicts = {}
    for tag_id in found:
        res = yield from authenticate_tag_sequential(tag_id, keystore, rng, timing, scheme)
        verdicts[tag_id] = res.verdict
    return verdicts


# -- attacks -----------------------------------------------------------------

def replay_attack(recorded_trace: Trace, keystore: Keystore, trials: int, seed: int, *,
                  timing: TimingModel | None = None, target_id: int | None = None,
                  nonce_source=None, scheme: str = "split", keep_samples: int = 2) -> AttackResult:
    """Replay captured AuthResponse tokens against fresh reader sessions."""
    timing = timing or TimingModel()
    captures = captured_responses(recorded_trace)
    if not captures:
        raise ValueError("recorded trace holds no authentication response to replay")
    result = AttackResult("replay", trials, notes={"captured_tokens": len(captures)})
    for i, trial_seed in enumerate(trial_seeds(seed, trials)):
        cap = captures[i % len(captures)]
        claimed = cap.tag_id if target_id is None else target_id
        rng = nonce_source if nonce_source is not None else Prng.from_seed(trial_seed, 0)
        sim = Simulator([ReplayDevice(claimed, cap.token)], timing)
        res = sim.run(authenticate_tag_sequential(claimed, keystore, rng, timing, scheme))
        if res.verdict is Verdict.VERIFIED:
            result.successes += 1
        if len(result.samples) < keep_samples:
            result.samples.append(sim.trace.serialize())
    return result


def clone_attack(known_id: int, keystore: Keystore, trials: int, seed: int, *,
                 timing: TimingModel | None = None, key: Key128 | None = None,
                 scheme: str = "split", keep_samples: int = 2) -> AttackResult:
    """A bogus tag with a copied id.  Given ``key`` it becomes a perfect clone."""
    timing = timing or TimingModel()
    result = AttackResult("clone", trials)
    histogram: dict[str, int] = {}
    for trial_seed in trial_seeds(seed, trials):
        if key is None:
            device = CloneDevice(known_id, Prng.from_seed(trial_seed, 1))
        else:
            device = Tag(TagConfig(known_id, key), PrngState.from_seed(trial_seed, 1))
        sim = Simulator([device], timing)
        verdicts = sim.run(_inventory_then_auth(keystore, Prng.from_seed(trial_seed, 0), timing, scheme))
        verdict = verdicts.get(known_id, Verdict.TIMEOUT)
        histogram[verdict.value] = histogram.get(verdict.value, 0) + 1
        if verdict is Verdict.VERIFIED:
            result.successes += 1
        if len(result.samples) < keep_samples:
            result.samples.append(sim.trace.serialize())
    result.notes["verdicts"] = dict(sorted(histogram.items()))
    return result


def _probe_session():
    found = yield from run_inventory()
    observed = found[0] if found else None
    reply = None
    if observed is not None:
        ex = yield Send(ReadMemory(observed, 0))
        reply = ex.outcome.frame if isinstance(ex.outcome, Single) else ex.outcome
    return observed, reply


def tracking_probe(sessions: int, alias_mode: bool, seed: int, *, timing: TimingModel | None = None,
                   require_reader_auth: bool = True) -> AttackResult:
    """An unauthorized reader tries to link one tag across field entries.

    A linkage is a session whose observed identifier was already seen in an
    earlier session.
    """
    timing = timing or TimingModel()
    setup = Prng.from_seed(seed, 0)
    memory = tuple(setup.nonce() + setup.nonce() for _ in range(MEMORY_PAGES))
    config = TagConfig(setup.u56(), Key128(setup.nonce() + setup.nonce()), memory,
                       require_reader_auth=require_reader_auth, alias_mode=alias_mode)
    tag = Tag(config, PrngState.from_seed(seed, 1))
    seen: set[int] = set()
    linkages = denied = leaked = 0
    for s in range(sessions):
        if s:
            tag.reset_session()
        observed, reply = Simulator([tag], timing).run(_probe_session())
        if observed in seen:
            linkages += 1
        seen.add(observed)
        if reply == Error(ERR_DENIED):
            denied += 1
        elif isinstance(reply, MemoryData):
            leaked += 1
    pairs = comb(sessions, 2)
    notes = {
        "alias_mode": alias_mode,
        "linkage_rate": linkages / max(sessions - 1, 1),
        "expected_alias_collisions": pairs / 2**56 if alias_mode else None,
        "memory_denied": denied,
        "memory_leaked": leaked,
    }
    return AttackResult("tracking", sessions, linkages, notes)


def memory_probe(trials: int, seed: int, *, timing: TimingModel | None = None) -> AttackResult:
    """Unauthenticated ReadMemory against tags that require reader auth."""
    timing = timing or TimingModel()
    result = AttackResult("memory", trials)
    denied = 0
    for trial_seed in trial_seeds(seed, trials):
        setup = Prng.from_seed(trial_seed, 0)
        memory = tuple(setup.nonce() + setup.nonce() for _ in range(MEMORY_PAGES))
        config = TagConfig(setup.u56(), Key128(setup.nonce() + setup.nonce()), memory, require_reader_auth=True)
        addr = setup.u64() % MEMORY_PAGES

        def attacker():
            found = yield from run_inventory()
            ex = yield Send(ReadMemory(found[0], addr))
            return ex.outcome

        outcome = Simulator([Tag(config, PrngState.from_seed(trial_seed, 1))], timing).run(attacker())
        frame = outcome.frame if isinstance(outcome, Single) else None
        if isinstance(frame, MemoryData):
            result.successes += 1
        elif frame == Error(ERR_DENIED):
            denied += 1
    result.notes["denied"] = denied
    return result


def reader_token_replay(trials: int, seed: int, *, timing: TimingModel | None = None) -> AttackResult:
    """Replay a reader's mutual-auth token into the tag's next session."""
    timing = timing or TimingModel()
    result = AttackResult("reader_token_replay", trials)
    for trial_seed in trial_seeds(seed, trials):
        setup = Prng.from_seed(trial_seed, 0)
        config = TagConfig(setup.u56(), Key128(setup.nonce() + setup.nonce()),
                           tuple(bytes(PAGE_SIZE) for _ in range(MEMORY_PAGES)), require_reader_auth=True)
        tag = Tag(config, PrngState.from_seed(trial_seed, 1))
        keystore = Keystore({config.id: config.key})
        honest = Simulator([tag], timing)
        honest.run(mutual_authenticate(config.id, keystore, Prng.from_seed(trial_seed, 2), timing))
        tokens = captured_frames(honest.trace, ReaderAuthToken)
        tag.reset_session()

        def attacker():
            for frame in tokens:
                yield Send(frame)
            ex = yield Send(ReadMemory(config.id, 0))
            return ex.outcome

        outcome = Simulator([tag], timing).run(attacker())
        if tag.state.reader_authenticated or (isinstance(outcome, Single) and isinstance(outcome.frame, MemoryData)):
            result.successes += 1
    return result
