"""Passive tag modeled as a pure state machine.

``tag_step`` maps (state, config, frame, now) to a new state plus an optional
reply.  The :class:`Tag` wrapper holds the current state for the engine.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .crypto import (
    DIR_READER_TO_TAG,
    DIR_TAG_TO_READER,
    Key128,
    PrngState,
    compute_token,
    prng_next,
    verify_token,
)
from .timing import TimingModel
from .wire import (
    ERR_BAD_ADDRESS,
    ERR_DENIED,
    ERR_NO_PENDING,
    ERR_REJECTED,
    AuthChallenge,
    AuthRequestAR,
    AuthResponse,
    Busy,
    Error,
    Frame,
    Inventory,
    MemoryData,
    ReadMemory,
    ReaderAuthToken,
    ResponseRequestRR,
    StayQuiet,
    TagReply,
    check_id,
    id_hex,
    matches_prefix,
)

MEMORY_PAGES = 16
PAGE_SIZE = 16


class TagMode(enum.Enum):
    READY = "ready"
    QUIET = "quiet"
    COMPUTING = "computing"


@dataclass(frozen=True)
class TagConfig:
    id: int
    key: Key128
    memory: tuple[bytes, ...] = tuple(bytes(PAGE_SIZE) for _ in range(MEMORY_PAGES))
    require_reader_auth: bool = False
    alias_mode: bool = False

    def __post_init__(self):
        check_id(self.id)
        if len(self.memory) != MEMORY_PAGES or any(len(p) != PAGE_SIZE for p in self.memory):
            raise ValueError(f"tag memory must be {MEMORY_PAGES} pages of {PAGE_SIZE} bytes")


@dataclass(frozen=True)
class TagState:
    prng: PrngState
    mode: TagMode = TagMode.READY
    result: bytes | None = None
    ready_at: int | None = None
    session_alias: int | None = None
    reader_authenticated: bool = False
    issued_nonces: frozenset[bytes] = field(default_factory=frozenset)
    used_nonces: frozenset[bytes] = field(default_factory=frozenset)


class TagStep(NamedTuple):
    state: TagState
    reply: Frame | None = None
    # time the reply starts; equals ``now`` unless the tag computes first
    reply_at: int | None = None
    # end of an on-tag AES computation started by this frame, for power accounting
    compute_until: int | None = None


def public_id(state: TagState, config: TagConfig) -> int:
    """The identity the tag answers with: its alias in alias mode, else its id."""
    if config.alias_mode and state.session_alias is not None:
        return state.session_alias
    return config.id


def tag_session_reset(state: TagState, config: TagConfig) -> TagState:
    """Model the tag leaving and re-entering the field."""
    prng, alias = state.prng, None
    if config.alias_mode:
        prng, raw = prng_next(prng)
        alias = int.from_bytes(raw, "big") >> 8
    return TagState(prng=prng, session_alias=alias)


def initial_tag_state(config: TagConfig, prng: PrngState) -> TagState:
    return tag_session_reset(TagState(prng=prng), config)


def _issue_nonce(state: TagState) -> tuple[TagState, bytes]:
    prng, nonce = prng_next(state.prng)
    return replace(state, prng=prng, issued_nonces=state.issued_nonces | {nonce}), nonce


def tag_step(state: TagState, config: TagConfig, frame: Frame | None, now: int,
             timing: TimingModel) -> TagStep:
    if frame is None:  # garbled on the air
        return TagStep(state)
    me = state.session_alias if config.alias_mode and state.session_alias is not None else config.id

    if type(frame) is Inventory:
        if state.mode is TagMode.READY and matches_prefix(me, frame.prefix_len, frame.prefix_bits):
            return TagStep(state, TagReply(me), now)
        return TagStep(state)

    if frame.addressed_to != me:
        return TagStep(state)

    latency = timing.aes_latency_us

    if isinstance(frame, StayQuiet):
        return TagStep(replace(state, mode=TagMode.QUIET, result=None, ready_at=None))

    if isinstance(frame, AuthChallenge):
        if latency > timing.reply_deadline_us:
            return TagStep(state, Busy(), now)
        token = compute_token(config.key, DIR_TAG_TO_READER, frame.nonce, me)
        state, tag_nonce = _issue_nonce(state)
        return TagStep(state, AuthResponse(token, tag_nonce), now + latency, now + latency)

    if isinstance(frame, AuthRequestAR):
        # a second AR overwrites the computation in flight
        token = compute_token(config.key, DIR_TAG_TO_READER, frame.nonce, me)
        state = replace(state, mode=TagMode.COMPUTING, result=token, ready_at=now + latency)
        return TagStep(state, None, None, now + latency)

    if isinstance(frame, ResponseRequestRR):
        if state.mode is not TagMode.COMPUTING:
            return TagStep(state, Error(ERR_NO_PENDING), now)
        if now < state.ready_at:
            return TagStep(state, Busy(), now)
        token = state.result
        state, tag_nonce = _issue_nonce(replace(state, mode=TagMode.READY, result=None, ready_at=None))
        return TagStep(state, AuthResponse(token, tag_nonce), now)

    if isinstance(frame, ReaderAuthToken):
        fresh = frame.nonce in state.issued_nonces and frame.nonce not in state.used_nonces
        if fresh:
            state = replace(state, used_nonces=state.used_nonces | {frame.nonce})
        if fresh and verify_token(config.key, DIR_READER_TO_TAG, frame.nonce, me, frame.token):
            return TagStep(replace(state, reader_authenticated=True))
        return TagStep(state, Error(ERR_REJECTED), now)

    if isinstance(frame, ReadMemory):
        if config.require_reader_auth and not state.reader_authenticated:
            return TagStep(state, Error(ERR_DENIED), now)
        if frame.addr >= MEMORY_PAGES:
            return TagStep(state, Error(ERR_BAD_ADDRESS), now)
        return TagStep(state, MemoryData(config.memory[frame.addr]), now)

    # replies from other tags and unsupported commands are ignored
    return TagStep(state)


class Tag:
    """Engine-facing holder of one tag's configuration and evolving state."""

    def __init__(self, config: TagConfig, prng: PrngState):
        self.config = config
        self.state = initial_tag_state(config, prng)
        self.actor = f"tag:{id_hex(config.id)}"

    @property
    def public_id(self) -> int:
        return public_id(self.state, self.config)

    def receive(self, frame: Frame | None, now: int, timing: TimingModel) -> TagStep:
        step = tag_step(self.state, self.config, frame, now, timing)
        self.state = step.state
        return step

    def reset_session(self) -> None:
        self.state = tag_session_reset(self.state, self.config)
