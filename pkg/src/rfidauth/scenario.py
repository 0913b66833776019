"""Scenario description and its strict JSON format.

A scenario file looks like::

    {
      "mode": "interleaved-auth",
      "seed": 7,
      "tags": [{"id": "00000000000001", "key": "000102030405060708090a0b0c0d0e0f"}],
      "timing": {...},          # optional, all six fields when present
      "power": {...},           # optional, all five fields when present
      "keystore": [...],        # optional, defaults to the tags' own keys
      "auth_scheme": "split"    # optional, "split" or "challenge"
    }

Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .crypto import Key128
from .reader import Keystore
from .tag import MEMORY_PAGES, PAGE_SIZE, TagConfig
from .timing import PowerModel, TimingModel

MODES = ("inventory", "seq-auth", "interleaved-auth", "mutual")
AUTH_SCHEMES = ("split", "challenge")


class ScenarioInvalid(ValueError):
    """Any reason a scenario cannot be run."""


class ParseError(ScenarioInvalid):
    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class DuplicateId(ScenarioInvalid):
    pass


class BadHexLength(ParseError):
    pass


@dataclass(frozen=True)
class Scenario:
    tags: tuple[TagConfig, ...]
    mode: str = "inventory"
    seed: int = 0
    timing: TimingModel = field(default_factory=TimingModel)
    power: PowerModel = field(default_factory=PowerModel)
    keystore: Keystore | None = None
    auth_scheme: str = "split"

    def __post_init__(self):
        validate(self)

    def reader_keystore(self) -> Keystore:
        if self.keystore is not None:
            return self.keystore
        return Keystore((t.id, t.key) for t in self.tags)


def validate(s: Scenario) -> None:
    seen = set()
    for t in s.tags:
        if t.id in seen:
            raise DuplicateId(f"duplicate tag id {t.id:014x}")
        seen.add(t.id)
    if s.mode not in MODES:
        raise ScenarioInvalid(f"unknown mode {s.mode!r}")
    if s.auth_scheme not in AUTH_SCHEMES:
        raise ScenarioInvalid(f"unknown auth_scheme {s.auth_scheme!r}")
    if not 0 <= s.seed < 2**64:
        raise ScenarioInvalid("seed must fit in 64 bits")


def _hex(value, nbytes: int, where: str) -> bytes:
    if not isinstance(value, str):
        raise ParseError("expected a hex string", field=where)
    if len(value) != 2 * nbytes:
        raise BadHexLength(f"expected {2 * nbytes} hex digits, got {len(value)}", field=where)
    try:
        return bytes.fromhex(value)
    except ValueError:
        raise ParseError("not valid hex", field=where) from None


def _check_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise ParseError("expected an object", field=where)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ParseError(f"unknown field {unknown[0]!r}", field=where)
    missing = sorted(required - set(obj))
    if missing:
        raise ParseError(f"missing field {missing[0]!r}", field=where)


def _bool(obj: dict, name: str, where: str) -> bool:
    v = obj.get(name, False)
    if not isinstance(v, bool):
        raise ParseError("expected true or false", field=f"{where}.{name}")
    return v


def _block(obj, cls, where: str):
    names = {f.name for f in fields(cls)}
    _check_keys(obj, names, names, where)
    try:
        return cls(**obj)
    except ValueError as exc:
        raise ParseError(str(exc), field=where) from None


def _parse_tag(obj, where: str) -> TagConfig:
    _check_keys(obj, {"id", "key", "require_reader_auth", "alias_mode", "memory"}, {"id", "key"}, where)
    tag_id = int.from_bytes(_hex(obj["id"], 7, f"{where}.id"), "big")
    key = Key128(_hex(obj["key"], 16, f"{where}.key"))
    memory = [bytes(PAGE_SIZE)] * MEMORY_PAGES
    pages = obj.get("memory", [])
    if not isinstance(pages, list) or len(pages) > MEMORY_PAGES:
        raise ParseError(f"memory must be a list of at most {MEMORY_PAGES} pages", field=f"{where}.memory")
    for i, page in enumerate(pages):
        memory[i] = _hex(page, PAGE_SIZE, f"{where}.memory[{i}]")
    return TagConfig(
        id=tag_id,
        key=key,
        memory=tuple(memory),
        require_reader_auth=_bool(obj, "require_reader_auth", where),
        alias_mode=_bool(obj, "alias_mode", where),
    )


def parse_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    _check_keys(doc, {"tags", "mode", "seed", "timing", "power", "keystore", "auth_scheme"},
                {"tags", "mode", "seed"}, "scenario")
    if not isinstance(doc["tags"], list):
        raise ParseError("expected a list", field="tags")
    tags = tuple(_parse_tag(t, f"tags[{i}]") for i, t in enumerate(doc["tags"]))
    seed = doc["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ParseError("seed must be an unsigned 64-bit integer", field="seed")
    if doc["mode"] not in MODES:
        raise ParseError(f"mode must be one of {', '.join(MODES)}", field="mode")
    scheme = doc.get("auth_scheme", "split")
    if scheme not in AUTH_SCHEMES:
        raise ParseError(f"auth_scheme must be one of {', '.join(AUTH_SCHEMES)}", field="auth_scheme")

    keystore = None
    if "keystore" in doc:
        if not isinstance(doc["keystore"], list):
            raise ParseError("expected a list", field="keystore")
        entries = {}
        for i, e in enumerate(doc["keystore"]):
            where = f"keystore[{i}]"
            _check_keys(e, {"id", "key"}, {"id", "key"}, where)
            tag_id = int.from_bytes(_hex(e["id"], 7, f"{where}.id"), "big")
            if tag_id in entries:
                raise DuplicateId(f"duplicate keystore id {tag_id:014x}")
            entries[tag_id] = Key128(_hex(e["key"], 16, f"{where}.key"))
        keystore = Keystore(entries)

    timing = _block(doc["timing"], TimingModel, "timing") if "timing" in doc else TimingModel()
    power = _block(doc["power"], PowerModel, "power") if "power" in doc else PowerModel()
    return Scenario(tags=tags, mode=doc["mode"], seed=seed, timing=timing, power=power,
                    keystore=keystore, auth_scheme=scheme)
