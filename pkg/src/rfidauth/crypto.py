"""AES-128, the counter-mode nonce generator and challenge-response tokens.

The block cipher follows FIPS-197 and is written out here rather than taken
from a library so that the package is self-contained and the published test
vectors can be checked against this code directly.  Rounds use the usual
32-bit T-table formulation; the tables are generated from the S-box at import
time.
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass, field
from functools import lru_cache

DIR_TAG_TO_READER = 0x01
DIR_READER_TO_TAG = 0x02

BLOCK_SIZE = 16
NONCE_SIZE = 8
ID_SIZE = 7


def _xtime(b: int) -> int:
    b <<= 1
    return (b ^ 0x11B) if b & 0x100 else b


def _gmul(a: int, b: int) -> int:
    p = 0
    while b:
        if b & 1:
            p ^= a
        a = _xtime(a)
        b >>= 1
    return p


def _build_sbox() -> tuple[list[int], list[int]]:
    # multiplicative inverse in GF(2^8) followed by the affine transform
    inv = [0] * 256
    for a in range(1, 256):
        for b in range(1, 256):
            if _gmul(a, b) == 1:
                inv[a] = b
                break
    sbox = [0] * 256
    for a in range(256):
        x = inv[a]
        s = x
        for shift in range(1, 5):
            s ^= ((x << shift) | (x >> (8 - shift))) & 0xFF
        sbox[a] = s ^ 0x63
    inv_sbox = [0] * 256
    for a, s in enumerate(sbox):
        inv_sbox[s] = a
    return sbox, inv_sbox


SBOX, INV_SBOX = _build_sbox()


def _rotr8(w: int) -> int:
    return ((w >> 8) | (w << 24)) & 0xFFFFFFFF


def _tables(box: list[int], coeffs: tuple[int, int, int, int]) -> list[list[int]]:
    c0, c1, c2, c3 = coeffs
    t0 = []
    for x in range(256):
        s = box[x]
        t0.append((_gmul(s, c0) << 24) | (_gmul(s, c1) << 16) | (_gmul(s, c2) << 8) | _gmul(s, c3))
    t1 = [_rotr8(w) for w in t0]
    t2 = [_rotr8(w) for w in t1]
    t3 = [_rotr8(w) for w in t2]
    return [t0, t1, t2, t3]


TE0, TE1, TE2, TE3 = _tables(SBOX, (2, 1, 1, 3))
TD0, TD1, TD2, TD3 = _tables(INV_SBOX, (14, 9, 13, 11))

_RCON = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36]


def _sub_word(w: int) -> int:
    return (
        (SBOX[w >> 24] << 24)
        | (SBOX[(w >> 16) & 0xFF] << 16)
        | (SBOX[(w >> 8) & 0xFF] << 8)
        | SBOX[w & 0xFF]
    )


def _inv_mix_word(w: int) -> int:
    # InvMixColumns of a single column, expressed through the decryption tables
    return (
        TD0[SBOX[w >> 24]]
        ^ TD1[SBOX[(w >> 16) & 0xFF]]
        ^ TD2[SBOX[(w >> 8) & 0xFF]]
        ^ TD3[SBOX[w & 0xFF]]
    )


@lru_cache(maxsize=4096)
def expand_key(key: bytes) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Return ``(encrypt_schedule, decrypt_schedule)`` as 44 words each.

    The decryption schedule is laid out for the equivalent inverse cipher:
    round keys in reverse order with InvMixColumns applied to rounds 1..9.
    """
    if len(key) != 16:
        raise ValueError(f"AES-128 key must be 16 bytes, got {len(key)}")
    w = [int.from_bytes(key[i : i + 4], "big") for i in range(0, 16, 4)]
    for i in range(4, 44):
        temp = w[i - 1]
        if i % 4 == 0:
            temp = _sub_word(((temp << 8) | (temp >> 24)) & 0xFFFFFFFF) ^ (_RCON[i // 4 - 1] << 24)
        w.append(w[i - 4] ^ temp)

    dw = []
    for rnd in range(10, -1, -1):
        words = w[4 * rnd : 4 * rnd + 4]
        if 0 < rnd < 10:
            words = [_inv_mix_word(x) for x in words]
        dw.extend(words)
    return tuple(w), tuple(dw)


def _encrypt_words(rk, s0: int, s1: int, s2: int, s3: int) -> bytes:
    te0, te1, te2, te3 = TE0, TE1, TE2, TE3
    s0 ^= rk[0]
    s1 ^= rk[1]
    s2 ^= rk[2]
    s3 ^= rk[3]
    k = 4
    for _ in range(9):
        t0 = te0[s0 >> 24] ^ te1[(s1 >> 16) & 0xFF] ^ te2[(s2 >> 8) & 0xFF] ^ te3[s3 & 0xFF] ^ rk[k]
        t1 = te0[s1 >> 24] ^ te1[(s2 >> 16) & 0xFF] ^ te2[(s3 >> 8) & 0xFF] ^ te3[s0 & 0xFF] ^ rk[k + 1]
        t2 = te0[s2 >> 24] ^ te1[(s3 >> 16) & 0xFF] ^ te2[(s0 >> 8) & 0xFF] ^ te3[s1 & 0xFF] ^ rk[k + 2]
        t3 = te0[s3 >> 24] ^ te1[(s0 >> 16) & 0xFF] ^ te2[(s1 >> 8) & 0xFF] ^ te3[s2 & 0xFF] ^ rk[k + 3]
        s0, s1, s2, s3 = t0, t1, t2, t3
        k += 4
    sb = SBOX
    out = bytes((
        sb[s0 >> 24], sb[(s1 >> 16) & 0xFF], sb[(s2 >> 8) & 0xFF], sb[s3 & 0xFF],
        sb[s1 >> 24], sb[(s2 >> 16) & 0xFF], sb[(s3 >> 8) & 0xFF], sb[s0 & 0xFF],
        sb[s2 >> 24], sb[(s3 >> 16) & 0xFF], sb[(s0 >> 8) & 0xFF], sb[s1 & 0xFF],
        sb[s3 >> 24], sb[(s0 >> 16) & 0xFF], sb[(s1 >> 8) & 0xFF], sb[s2 & 0xFF],
    ))
    last = (rk[40] << 96) | (rk[41] << 64) | (rk[42] << 32) | rk[43]
    return (int.from_bytes(out, "big") ^ last).to_bytes(16, "big")


def _decrypt_words(rk, s0: int, s1: int, s2: int, s3: int) -> bytes:
    td0, td1, td2, td3 = TD0, TD1, TD2, TD3
    s0 ^= rk[0]
    s1 ^= rk[1]
    s2 ^= rk[2]
    s3 ^= rk[3]
    k = 4
    for _ in range(9):
        t0 = td0[s0 >> 24] ^ td1[(s3 >> 16) & 0xFF] ^ td2[(s2 >> 8) & 0xFF] ^ td3[s1 & 0xFF] ^ rk[k]
        t1 = td0[s1 >> 24] ^ td1[(s0 >> 16) & 0xFF] ^ td2[(s3 >> 8) & 0xFF] ^ td3[s2 & 0xFF] ^ rk[k + 1]
        t2 = td0[s2 >> 24] ^ td1[(s1 >> 16) & 0xFF] ^ td2[(s0 >> 8) & 0xFF] ^ td3[s3 & 0xFF] ^ rk[k + 2]
        t3 = td0[s3 >> 24] ^ td1[(s2 >> 16) & 0xFF] ^ td2[(s1 >> 8) & 0xFF] ^ td3[s0 & 0xFF] ^ rk[k + 3]
        s0, s1, s2, s3 = t0, t1, t2, t3
        k += 4
    ib = INV_SBOX
    out = bytes((
        ib[s0 >> 24], ib[(s3 >> 16) & 0xFF], ib[(s2 >> 8) & 0xFF], ib[s1 & 0xFF],
        ib[s1 >> 24], ib[(s0 >> 16) & 0xFF], ib[(s3 >> 8) & 0xFF], ib[s2 & 0xFF],
        ib[s2 >> 24], ib[(s1 >> 16) & 0xFF], ib[(s0 >> 8) & 0xFF], ib[s3 & 0xFF],
        ib[s3 >> 24], ib[(s2 >> 16) & 0xFF], ib[(s1 >> 8) & 0xFF], ib[s0 & 0xFF],
    ))
    last = (rk[40] << 96) | (rk[41] << 64) | (rk[42] << 32) | rk[43]
    return (int.from_bytes(out, "big") ^ last).to_bytes(16, "big")


def _check_block(block: bytes) -> None:
    if len(block) != BLOCK_SIZE:
        raise ValueError(f"block must be 16 bytes, got {len(block)}")


@dataclass(frozen=True)
class Key128:
    """A 128-bit shared secret.  ``repr`` never shows the key material."""

    bytes: bytes = field(repr=False)

    def __post_init__(self):
        if not isinstance(self.bytes, (bytes, bytearray)) or len(self.bytes) != 16:
            raise ValueError("Key128 needs exactly 16 bytes")
        object.__setattr__(self, "bytes", bytes(self.bytes))

    @classmethod
    def from_hex(cls, text: str) -> "Key128":
        return cls(bytes.fromhex(text))

    def hex(self) -> str:
        return self.bytes.hex()


def _key_bytes(key: Key128 | bytes) -> bytes:
    return key.bytes if isinstance(key, Key128) else key


def aes128_encrypt(key: Key128 | bytes, pt: bytes) -> bytes:
    """Encrypt one 16-byte block."""
    _check_block(pt)
    rk = expand_key(_key_bytes(key))[0]
    v = int.from_bytes(pt, "big")
    return _encrypt_words(rk, v >> 96, (v >> 64) & 0xFFFFFFFF, (v >> 32) & 0xFFFFFFFF, v & 0xFFFFFFFF)


def aes128_decrypt(key: Key128 | bytes, ct: bytes) -> bytes:
    """Decrypt one 16-byte block; inverse of :func:`aes128_encrypt`."""
    _check_block(ct)
    rk = expand_key(_key_bytes(key))[1]
    v = int.from_bytes(ct, "big")
    return _decrypt_words(rk, v >> 96, (v >> 64) & 0xFFFFFFFF, (v >> 32) & 0xFFFFFFFF, v & 0xFFFFFFFF)


@dataclass(frozen=True)
class PrngState:
    """Counter-mode generator state: nonce ``i`` is ``AES_seed_key(i)[:8]``."""

    seed_key: Key128
    counter: int = 0

    @classmethod
    def from_seed(cls, seed: int, stream: int = 0) -> "PrngState":
        """Derive an independent stream from a 64-bit seed and a stream label."""
        key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big") + (stream & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "big")
        return cls(Key128(key))


def prng_next(state: PrngState) -> tuple[PrngState, bytes]:
    block = aes128_encrypt(state.seed_key, state.counter.to_bytes(16, "big"))
    return PrngState(state.seed_key, state.counter + 1), block[:NONCE_SIZE]


class Prng:
    """Mutable convenience wrapper around :class:`PrngState`."""

    def __init__(self, state: PrngState):
        self.state = state

    @classmethod
    def from_seed(cls, seed: int, stream: int = 0) -> "Prng":
        return cls(PrngState.from_seed(seed, stream))

    def nonce(self) -> bytes:
        self.state, value = prng_next(self.state)
        return value

    def u64(self) -> int:
        return int.from_bytes(self.nonce(), "big")

    def u56(self) -> int:
        return self.u64() >> 8


def token_block(direction: int, nonce: bytes, tag_id: int) -> bytes:
    if direction not in (DIR_TAG_TO_READER, DIR_READER_TO_TAG):
        raise ValueError(f"bad direction byte {direction:#04x}")
    if len(nonce) != NONCE_SIZE:
        raise ValueError("nonce must be 8 bytes")
    return bytes([direction]) + nonce + tag_id.to_bytes(ID_SIZE, "big")


def compute_token(key: Key128 | bytes, direction: int, nonce: bytes, tag_id: int) -> bytes:
    """AES of ``direction || nonce || id``; the layout fills exactly one block."""
    return aes128_encrypt(key, token_block(direction, nonce, tag_id))


def verify_token(key: Key128 | bytes, direction: int, nonce: bytes, tag_id: int, token: bytes) -> bool:
    expected = compute_token(key, direction, nonce, tag_id)
    # compare_digest keeps the comparison's structure independent of the outcome
    return len(token) == BLOCK_SIZE and hmac.compare_digest(expected, bytes(token))
