"""Shared-channel outcomes and the requests a reader process makes of the engine.

Reader logic is written as generators.  They ``yield`` a :class:`Send`,
:class:`WaitUntil` or :class:`Record` and the engine resumes them with the
result once virtual time has advanced accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

from .wire import Frame


@dataclass(frozen=True)
class Silence:
    pass


@dataclass(frozen=True)
class Single:
    frame: Frame


@dataclass(frozen=True)
class Collision:
    pass


@dataclass(frozen=True)
class Garbled:
    """Exactly one reply arrived but failed to decode (bad CRC and friends)."""

    kind: str


ChannelOutcome = Union[Silence, Single, Collision, Garbled]


def channel_resolve(replies: list[Frame]) -> ChannelOutcome:
    """Two or more replies in one window collide and carry no content."""
    if not replies:
        return Silence()
    if len(replies) == 1:
        return Single(replies[0])
    return Collision()


@dataclass(frozen=True)
class Send:
    frame: Frame
    expect_reply: bool = True


@dataclass(frozen=True)
class WaitUntil:
    time_us: int


@dataclass(frozen=True)
class Record:
    """Ask the engine to log a verdict for ``tag_id``."""

    tag_id: int
    verdict: str


@dataclass(frozen=True)
class Mark:
    """Log a reader-side marker such as a protocol phase boundary."""

    detail: str


class Exchange(NamedTuple):
    outcome: ChannelOutcome | None
    # when the reader's command finished on the air
    tx_end: int
