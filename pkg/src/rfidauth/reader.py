"""Reader side: anti-collision tree walk, keystore and authentication drivers.

The tree walk itself is the pure function :func:`inventory_next`.  The
authentication drivers are generator processes run by
:class:`rfidauth.engine.Simulator`; each returns its verdicts when finished.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Generator, Iterable, Mapping

from .channel import Collision, Exchange, Garbled, Record, Send, Silence, Single, WaitUntil
from .crypto import DIR_READER_TO_TAG, DIR_TAG_TO_READER, Key128, Prng, compute_token, verify_token
from .timing import TimingModel
from .wire import (
    ERR_REJECTED,
    ID_BITS,
    AuthChallenge,
    AuthRequestAR,
    AuthResponse,
    Busy,
    Error,
    Inventory,
    ReaderAuthToken,
    ResponseRequestRR,
    StayQuiet,
    TagReply,
)

Process = Generator[object, object, object]


class WalkStuck(RuntimeError):
    """A full-length prefix still collides, so two tags share an id."""


class Verdict(str, enum.Enum):
    VERIFIED = "verified"
    FAILED = "failed"
    BUSY = "busy"
    TIMEOUT = "timeout"
    KEY_UNKNOWN = "key_unknown"
    READER_REJECTED = "reader_rejected"


class Keystore:
    """Back-end database mapping tag identity to its shared key."""

    def __init__(self, entries: Mapping[int, Key128] | Iterable[tuple[int, Key128]] = ()):
        self._keys = dict(entries)

    def get(self, tag_id: int) -> Key128 | None:
        return self._keys.get(tag_id)

    def __contains__(self, tag_id: int) -> bool:
        return tag_id in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def keys(self) -> list[Key128]:
        return list(self._keys.values())


# -- anti-collision -------------------------------------------------------

@dataclass(frozen=True)
class Query:
    prefix_len: int
    prefix_bits: int


@dataclass(frozen=True)
class Quiet:
    tag_id: int


@dataclass(frozen=True)
class Done:
    pass


@dataclass(frozen=True)
class InventoryWalk:
    pending: tuple[tuple[int, int], ...] = ((0, 0),)
    found: tuple[int, ...] = ()


def inventory_next(walk: InventoryWalk, last_outcome) -> tuple[InventoryWalk, Query | Quiet | Done]:
    """Advance the depth-first walk given the outcome of the last query.

    ``last_outcome`` is ``None`` at the start and after a stay-quiet command;
    otherwise it is the channel outcome of the query for the prefix on top of
    the stack.  Branch ``0`` is explored before branch ``1``.
    """
    if last_outcome is not None:
        (plen, bits), rest = walk.pending[-1], walk.pending[:-1]
        if isinstance(last_outcome, Single) and isinstance(last_outcome.frame, TagReply):
            tag_id = last_outcome.frame.tag_id
            found = walk.found if tag_id in walk.found else walk.found + (tag_id,)
            return InventoryWalk(rest, found), Quiet(tag_id)
        if isinstance(last_outcome, (Collision, Garbled, Single)):
            if plen == ID_BITS:
                raise WalkStuck(f"prefix {bits:014x} of full length still collides")
            walk = InventoryWalk(rest + ((plen + 1, (bits << 1) | 1), (plen + 1, bits << 1)), walk.found)
        else:
            walk = InventoryWalk(rest, walk.found)
    if not walk.pending:
        return walk, Done()
    plen, bits = walk.pending[-1]
    return walk, Query(plen, bits)


def run_inventory() -> Process:
    """Singulate every tag in the field; returns the ids in discovery order."""
    walk, outcome = InventoryWalk(), None
    while True:
        walk, action = inventory_next(walk, outcome)
        if isinstance(action, Done):
            return list(walk.found)
        if isinstance(action, Query):
            ex = yield Send(Inventory(action.prefix_len, action.prefix_bits))
            outcome = ex.outcome
        else:
            yield Send(StayQuiet(action.tag_id), expect_reply=False)
            outcome = None


# -- authentication --------------------------------------------------------

class Phase(enum.Enum):
    CHALLENGE_SENT = "challenge_sent"
    AR_SENT = "ar_sent"
    VERIFIED = "verified"
    FAILED = "failed"


@dataclass
class AuthSession:
    tag_id: int
    nonce: bytes
    key: Key128 = field(repr=False)
    phase: Phase = Phase.CHALLENGE_SENT
    expected_ready_at: int | None = None
    order: int = 0


@dataclass(frozen=True)
class AuthResult:
    tag_id: int
    verdict: Verdict
    nonce: bytes | None = None
    tag_nonce: bytes | None = None


def judge_response(outcome, key: Key128, nonce: bytes, tag_id: int) -> tuple[Verdict, bytes | None]:
    """Turn the reply window for a challenge into a verdict."""
    if isinstance(outcome, Silence):
        return Verdict.TIMEOUT, None
    if isinstance(outcome, Single):
        frame = outcome.frame
        if isinstance(frame, Busy):
            return Verdict.BUSY, None
        if isinstance(frame, AuthResponse) and verify_token(key, DIR_TAG_TO_READER, nonce, tag_id, frame.token):
            return Verdict.VERIFIED, frame.tag_nonce
    return Verdict.FAILED, None


def _split_exchange(tag_id: int, nonce: bytes, timing: TimingModel) -> Process:
    ex: Exchange = yield Send(AuthRequestAR(tag_id, nonce), expect_reply=False)
    yield WaitUntil(ex.tx_end + timing.aes_latency_us)
    ex = yield Send(ResponseRequestRR(tag_id))
    return ex.outcome


def authenticate_tag_sequential(tag_id: int, keystore: Keystore, rng: Prng, timing: TimingModel,
                                scheme: str = "challenge", record: bool = True) -> Process:
    """Authenticate one tag.

    ``scheme="challenge"`` sends a single AuthChallenge and expects the token
    within the reply window; a tag that cannot finish AES in time answers
    Busy.  ``scheme="split"`` sends AR, waits out the AES latency and collects
    the token with RR.
    """
    key = keystore.get(tag_id)
    if key is None:
        result = AuthResult(tag_id, Verdict.KEY_UNKNOWN)
    else:
        nonce = rng.nonce()
        if scheme == "challenge":
            outcome = (yield Send(AuthChallenge(tag_id, nonce))).outcome
        elif scheme == "split":
            outcome = yield from _split_exchange(tag_id, nonce, timing)
        else:
            raise ValueError(f"unknown auth scheme {scheme!r}")
        verdict, tag_nonce = judge_response(outcome, key, nonce, tag_id)
        result = AuthResult(tag_id, verdict, nonce, tag_nonce)
    if record:
        yield Record(tag_id, result.verdict.value)
    return result


def authenticate_sequential(ids: list[int], keystore: Keystore, rng: Prng, timing: TimingModel,
                            scheme: str = "split") -> Process:
    verdicts = {}
    for tag_id in ids:
        res = yield from authenticate_tag_sequential(tag_id, keystore, rng, timing, scheme)
        verdicts[tag_id] = res.verdict
    return verdicts


def authenticate_interleaved(ids: list[int], keystore: Keystore, rng: Prng, timing: TimingModel) -> Process:
    """Send every AR back to back, then collect results in order of readiness.

    The reader waits for each tag's expected ready time instead of polling
    early; ties go to singulation order.
    """
    verdicts: dict[int, Verdict] = {}
    sessions: list[AuthSession] = []
    for order, tag_id in enumerate(ids):
        key = keystore.get(tag_id)
        if key is None:
            verdicts[tag_id] = Verdict.KEY_UNKNOWN
            yield Record(tag_id, Verdict.KEY_UNKNOWN.value)
            continue
        nonce = rng.nonce()
        ex = yield Send(AuthRequestAR(tag_id, nonce), expect_reply=False)
        sessions.append(AuthSession(tag_id, nonce, key, Phase.AR_SENT,
                                    ex.tx_end + timing.aes_latency_us, order))

    for s in sorted(sessions, key=lambda s: (s.expected_ready_at, s.order)):
        yield WaitUntil(s.expected_ready_at)
        ex = yield Send(ResponseRequestRR(s.tag_id))
        verdict, _ = judge_response(ex.outcome, s.key, s.nonce, s.tag_id)
        s.phase = Phase.VERIFIED if verdict is Verdict.VERIFIED else Phase.FAILED
        verdicts[s.tag_id] = verdict
        yield Record(s.tag_id, verdict.value)
    return {tag_id: verdicts[tag_id] for tag_id in ids}


def mutual_authenticate(tag_id: int, keystore: Keystore, rng: Prng, timing: TimingModel,
                        scheme: str = "split") -> Process:
    """Tag proves itself first; the reader then answers the tag's own nonce."""
    first = yield from authenticate_tag_sequential(tag_id, keystore, rng, timing, scheme, record=False)
    verdict = first.verdict
    if verdict is Verdict.VERIFIED:
        if first.tag_nonce is None:
            verdict = Verdict.FAILED
        else:
            key = keystore.get(tag_id)
            token = compute_token(key, DIR_READER_TO_TAG, first.tag_nonce, tag_id)
            ex = yield Send(ReaderAuthToken(tag_id, first.tag_nonce, token))
            # the tag stays silent when it accepts the reader
            if isinstance(ex.outcome, Silence):
                verdict = Verdict.VERIFIED
            elif isinstance(ex.outcome, Single) and ex.outcome.frame == Error(ERR_REJECTED):
                verdict = Verdict.READER_REJECTED
            else:
                verdict = Verdict.FAILED
    yield Record(tag_id, verdict.value)
    return AuthResult(tag_id, verdict, first.nonce, first.tag_nonce)


def authenticate_mutual_all(ids: list[int], keystore: Keystore, rng: Prng, timing: TimingModel,
                            scheme: str = "split") -> Process:
    verdicts = {}
    for tag_id in ids:
        res = yield from mutual_authenticate(tag_id, keystore, rng, timing, scheme)
        verdicts[tag_id] = res.verdict
    return verdicts

