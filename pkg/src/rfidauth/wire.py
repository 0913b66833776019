"""Byte-exact frame codec for reader commands and tag replies.

Every frame is ``opcode (1) || body || crc16 (2, big-endian)`` where the CRC
is CRC-16/CCITT-FALSE over opcode and body.  Tag identities are 56-bit
integers carried MSB-first in 7 bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import ClassVar

ID_BITS = 56
ID_BYTES = 7
ID_MASK = (1 << ID_BITS) - 1

ERR_DENIED = 0x01
ERR_BAD_ADDRESS = 0x02
ERR_NO_PENDING = 0x03
ERR_REJECTED = 0x04


class FrameError(ValueError):
    """Base class for frames that cannot be decoded."""

    kind = "frameerror"


class BadCrc(FrameError):
    kind = "badcrc"


class UnknownOpcode(FrameError):
    kind = "unknownopcode"


class TruncatedBody(FrameError):
    kind = "truncatedbody"


class MalformedBody(FrameError):
    """Body has the wrong length or violates a field invariant."""

    kind = "malformedbody"


def _make_crc_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
        table.append(crc & 0xFFFF)
    return table


_CRC_TABLE = _make_crc_table()


def crc16_ccitt_false(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout."""
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ b]
    return crc


def id_to_bytes(tag_id: int) -> bytes:
    return tag_id.to_bytes(ID_BYTES, "big")


def id_hex(tag_id: int) -> str:
    return f"{tag_id:014x}"


def check_id(tag_id: int) -> int:
    if not isinstance(tag_id, int) or not 0 <= tag_id <= ID_MASK:
        raise ValueError(f"tag id must be a 56-bit unsigned integer, got {tag_id!r}")
    return tag_id


def matches_prefix(tag_id: int, prefix_len: int, prefix_bits: int) -> bool:
    """True iff the ``prefix_len`` most significant bits of ``tag_id`` equal ``prefix_bits``."""
    if prefix_len == 0:
        return True
    return (tag_id >> (ID_BITS - prefix_len)) == prefix_bits


def _need(body: bytes, n: int) -> None:
    if len(body) < n:
        raise TruncatedBody(f"body has {len(body)} bytes, need {n}")
    if len(body) > n:
        raise MalformedBody(f"body has {len(body)} bytes, expected {n}")


class Frame:
    """Base for all frame variants."""

    OPCODE: ClassVar[int]

    def body(self) -> bytes:
        raise NotImplementedError

    @classmethod
    def parse(cls, body: bytes) -> "Frame":
        raise NotImplementedError

    @property
    def addressed_to(self) -> int | None:
        return getattr(self, "tag_id", None)

    def describe(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bytes):
                v = v.hex()
            elif f.name == "tag_id":
                v = id_hex(v)
            parts.append(f"{f.name}={v}")
        return f"{type(self).__name__}({', '.join(parts)})"


@dataclass(frozen=True)
class Inventory(Frame):
    OPCODE: ClassVar[int] = 0x01
    prefix_len: int = 0
    prefix_bits: int = 0

    def __post_init__(self):
        if not 0 <= self.prefix_len <= ID_BITS:
            raise ValueError(f"prefix_len out of range: {self.prefix_len}")
        if self.prefix_bits < 0 or self.prefix_bits >> self.prefix_len:
            raise ValueError("prefix_bits wider than prefix_len")

    def body(self) -> bytes:
        nbytes = (self.prefix_len + 7) // 8
        padded = self.prefix_bits << (nbytes * 8 - self.prefix_len)
        return bytes([self.prefix_len]) + padded.to_bytes(nbytes, "big")

    @classmethod
    def parse(cls, body):
        if not body:
            raise TruncatedBody("inventory frame without prefix length")
        plen = body[0]
        if plen > ID_BITS:
            raise MalformedBody(f"prefix_len {plen} exceeds {ID_BITS}")
        nbytes = (plen + 7) // 8
        _need(body[1:], nbytes)
        raw = int.from_bytes(body[1:], "big")
        pad = nbytes * 8 - plen
        if raw & ((1 << pad) - 1):
            raise MalformedBody("non-zero prefix padding")
        return cls(plen, raw >> pad)


@dataclass(frozen=True)
class TagReply(Frame):
    OPCODE: ClassVar[int] = 0x02
    tag_id: int

    def body(self):
        return id_to_bytes(self.tag_id)

    @classmethod
    def parse(cls, body):
        _need(body, ID_BYTES)
        return cls(int.from_bytes(body, "big"))


@dataclass(frozen=True)
class StayQuiet(Frame):
    OPCODE: ClassVar[int] = 0x03
    tag_id: int

    def body(self):
        return id_to_bytes(self.tag_id)

    @classmethod
    def parse(cls, body):
        _need(body, ID_BYTES)
        return cls(int.from_bytes(body, "big"))


@dataclass(frozen=True)
class AuthChallenge(Frame):
    OPCODE: ClassVar[int] = 0x04
    tag_id: int
    nonce: bytes

    def body(self):
        return id_to_bytes(self.tag_id) + self.nonce

    @classmethod
    def parse(cls, body):
        _need(body, 15)
        return cls(int.from_bytes(body[:7], "big"), bytes(body[7:]))


@dataclass(frozen=True)
class AuthResponse(Frame):
    """Tag token, optionally followed by a tag-issued nonce for mutual auth."""

    OPCODE: ClassVar[int] = 0x05
    token: bytes
    tag_nonce: bytes | None = None

    def body(self):
        return self.token + (self.tag_nonce or b"")

    @classmethod
    def parse(cls, body):
        if len(body) == 16:
            return cls(bytes(body))
        _need(body, 24)
        return cls(bytes(body[:16]), bytes(body[16:]))


@dataclass(frozen=True)
class AuthRequestAR(Frame):
    OPCODE: ClassVar[int] = 0x06
    tag_id: int
    nonce: bytes

    def body(self):
        return id_to_bytes(self.tag_id) + self.nonce

    @classmethod
    def parse(cls, body):
        _need(body, 15)
        return cls(int.from_bytes(body[:7], "big"), bytes(body[7:]))


@dataclass(frozen=True)
class ResponseRequestRR(Frame):
    OPCODE: ClassVar[int] = 0x07
    tag_id: int

    def body(self):
        return id_to_bytes(self.tag_id)

    @classmethod
    def parse(cls, body):
        _need(body, ID_BYTES)
        return cls(int.from_bytes(body, "big"))


@dataclass(frozen=True)
class ReaderAuthToken(Frame):
    OPCODE: ClassVar[int] = 0x08
    tag_id: int
    nonce: bytes
    token: bytes

    def body(self):
        return id_to_bytes(self.tag_id) + self.nonce + self.token

    @classmethod
    def parse(cls, body):
        _need(body, 31)
        return cls(int.from_bytes(body[:7], "big"), bytes(body[7:15]), bytes(body[15:]))


@dataclass(frozen=True)
class ReadMemory(Frame):
    OPCODE: ClassVar[int] = 0x09
    tag_id: int
    addr: int = 0

    def body(self):
        return id_to_bytes(self.tag_id) + self.addr.to_bytes(2, "big")

    @classmethod
    def parse(cls, body):
        _need(body, 9)
        return cls(int.from_bytes(body[:7], "big"), int.from_bytes(body[7:], "big"))


@dataclass(frozen=True)
class MemoryData(Frame):
    OPCODE: ClassVar[int] = 0x0A
    payload: bytes

    def body(self):
        return self.payload

    @classmethod
    def parse(cls, body):
        _need(body, 16)
        return cls(bytes(body))


@dataclass(frozen=True)
class Busy(Frame):
    OPCODE: ClassVar[int] = 0x0B

    def body(self):
        return b""

    @classmethod
    def parse(cls, body):
        _need(body, 0)
        return cls()


@dataclass(frozen=True)
class Error(Frame):
    OPCODE: ClassVar[int] = 0x0C
    code: int

    def body(self):
        return bytes([self.code])

    @classmethod
    def parse(cls, body):
        _need(body, 1)
        return cls(body[0])


FRAME_TYPES: dict[int, type[Frame]] = {
    cls.OPCODE: cls
    for cls in (
        Inventory, TagReply, StayQuiet, AuthChallenge, AuthResponse, AuthRequestAR,
        ResponseRequestRR, ReaderAuthToken, ReadMemory, MemoryData, Busy, Error,
    )
}


def encode_frame(f: Frame) -> bytes:
    payload = bytes([f.OPCODE]) + f.body()
    return payload + crc16_ccitt_false(payload).to_bytes(2, "big")


def decode_frame(b: bytes) -> Frame:
    """Decode one frame; raises a :class:`FrameError` subclass on bad input."""
    if len(b) < 3:
        raise TruncatedBody(f"frame of {len(b)} bytes is shorter than opcode + crc")
    payload, crc = b[:-2], int.from_bytes(b[-2:], "big")
    if crc16_ccitt_false(payload) != crc:
        raise BadCrc(f"crc mismatch: got {crc:04x}, computed {crc16_ccitt_false(payload):04x}")
    cls = FRAME_TYPES.get(payload[0])
    if cls is None:
        raise UnknownOpcode(f"unknown opcode {payload[0]:#04x}")
    return cls.parse(payload[1:])
