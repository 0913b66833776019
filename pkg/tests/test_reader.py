import random

import pytest

from rfidauth.channel import Collision, Garbled, Silence, Single
from rfidauth.crypto import Key128, Prng, PrngState, compute_token, DIR_TAG_TO_READER
from rfidauth.engine import Simulator
from rfidauth.reader import (
    Done,
    InventoryWalk,
    Keystore,
    Query,
    Quiet,
    Verdict,
    WalkStuck,
    authenticate_interleaved,
    authenticate_mutual_all,
    authenticate_sequential,
    authenticate_tag_sequential,
    inventory_next,
    judge_response,
    run_inventory,
)
from rfidauth.tag import Tag, TagConfig
from rfidauth.wire import AuthResponse, Busy, TagReply

from conftest import WORKED_TIMING, key_for
from oracles import singulate


def drive(ids):
    """Run the pure walk against an ideal channel; returns (found, queries)."""
    quiet = set()
    walk, outcome, queries = InventoryWalk(), None, []
    while True:
        walk, action = inventory_next(walk, outcome)
        if isinstance(action, Done):
            return list(walk.found), queries
        if isinstance(action, Quiet):
            quiet.add(action.tag_id)
            outcome = None
            continue
        queries.append((action.prefix_len, action.prefix_bits))
        plen, bits = action.prefix_len, action.prefix_bits
        hits = [i for i in ids if i not in quiet and (plen == 0 or i >> (56 - plen) == bits)]
        outcome = Silence() if not hits else Single(TagReply(hits[0])) if len(hits) == 1 else Collision()


def test_empty_field_one_query():
    assert drive([]) == ([], [(0, 0)])


def test_single_tag_one_query():
    assert drive([12345]) == ([12345], [(0, 0)])


def test_three_tag_worked_order():
    a, b, c = 0b00 << 54, 0b01 << 54, 0b10 << 54
    found, queries = drive([c, a, b])
    assert found == [a, b, c]
    assert queries == [(0, 0), (1, 0), (2, 0), (2, 1), (1, 1)]


def test_full_length_collision_is_stuck():
    walk = InventoryWalk(((56, 7),))
    with pytest.raises(WalkStuck):
        inventory_next(walk, Collision())


def test_garbled_treated_as_collision():
    walk, action = inventory_next(InventoryWalk(), Garbled("bad_crc"))
    assert action == Query(1, 0)
    assert walk.pending == ((1, 1), (1, 0))


@pytest.mark.parametrize("n", [0, 1, 2, 5, 17, 64])
def test_walk_matches_oracle(n):
    rng = random.Random(n)
    for _ in range(20):
        ids = rng.sample(range(1 << 56), n)
        found, queries = drive(ids)
        assert (found, len(queries)) == singulate(ids)


def test_query_bound():
    # each found tag costs at most 56 collision nodes plus its own leaf and sibling
    rng = random.Random(9)
    for n in range(1, 40):
        ids = rng.sample(range(1 << 56), n)
        _, queries = drive(ids)
        assert len(queries) <= 2 * n * 56 + 1


def test_adjacent_ids_need_deep_walk():
    ids = [0x10, 0x11]
    found, queries = drive(ids)
    assert found == ids and len(queries) == 2 * 56 + 1


def test_inventory_through_engine_matches_oracle():
    rng = random.Random(3)
    ids = rng.sample(range(1 << 56), 12)
    tags = [Tag(TagConfig(i, key_for(1)), PrngState.from_seed(0, k + 1)) for k, i in enumerate(ids)]
    sim = Simulator(tags, WORKED_TIMING)
    found = sim.run(run_inventory())
    expect, queries = singulate(ids)
    assert found == expect
    sent = [e for e in sim.trace if e.actor == "reader" and e.kind == "TxStart" and e.detail.startswith("01")]
    assert len(sent) == queries


# -- authentication

def _field(n, wrong=()):
    ids = [(k + 1) << 40 for k in range(n)]
    tags = [Tag(TagConfig(i, key_for(k + 100 if k in wrong else k)), PrngState.from_seed(0, k + 1))
            for k, i in enumerate(ids)]
    return ids, tags, Keystore({i: key_for(k) for k, i in enumerate(ids)})


def _run(tags, process):
    sim = Simulator(tags, WORKED_TIMING)
    return sim.run(process), sim


def test_worked_schedule_sequential_24000():
    ids, tags, ks = _field(3)
    verdicts, sim = _run(tags, authenticate_sequential(ids, ks, Prng.from_seed(1), WORKED_TIMING))
    assert sim.now == 24000
    assert set(verdicts.values()) == {Verdict.VERIFIED}


def test_worked_schedule_interleaved_12000():
    ids, tags, ks = _field(3)
    verdicts, sim = _run(tags, authenticate_interleaved(ids, ks, Prng.from_seed(1), WORKED_TIMING))
    assert sim.now == 12000
    assert set(verdicts.values()) == {Verdict.VERIFIED}
    rr_starts = [e.time_us for e in sim.trace if e.kind == "TxStart" and e.actor == "reader"]
    # ARs at 0, 1000, 2000; RRs as each tag becomes ready
    assert rr_starts == [0, 1000, 2000, 6000, 8000, 10000]


def test_wrong_key_fails_in_both_drivers():
    for driver in (authenticate_sequential, authenticate_interleaved):
        ids, tags, ks = _field(3, wrong={1})
        verdicts, _ = _run(tags, driver(ids, ks, Prng.from_seed(1), WORKED_TIMING))
        assert [verdicts[i] for i in ids] == [Verdict.VERIFIED, Verdict.FAILED, Verdict.VERIFIED]


def test_unknown_id_skips_exchange():
    ids, tags, _ = _field(2)
    ks = Keystore({ids[0]: key_for(0)})
    for driver in (authenticate_sequential, authenticate_interleaved):
        verdicts, sim = _run(tags, driver(ids, ks, Prng.from_seed(1), WORKED_TIMING))
        assert verdicts[ids[1]] is Verdict.KEY_UNKNOWN
        assert all(f"{ids[1]:014x}" not in e.detail for e in sim.trace if e.kind == "TxStart")


def test_challenge_scheme_reports_busy_when_tag_is_slow():
    ids, tags, ks = _field(1)
    res, _ = _run(tags, authenticate_tag_sequential(ids[0], ks, Prng.from_seed(1), WORKED_TIMING, "challenge"))
    assert res.verdict is Verdict.BUSY


def test_absent_tag_times_out():
    ids, _, ks = _field(1)
    res, sim = _run([], authenticate_tag_sequential(ids[0], ks, Prng.from_seed(1), WORKED_TIMING))
    assert res.verdict is Verdict.TIMEOUT


def test_mutual_auth_verifies_and_unlocks():
    ids, tags, ks = _field(2)
    for t in tags:
        t.config = TagConfig(t.config.id, t.config.key, require_reader_auth=True)
    verdicts, _ = _run(tags, authenticate_mutual_all(ids, ks, Prng.from_seed(1), WORKED_TIMING))
    assert set(verdicts.values()) == {Verdict.VERIFIED}
    assert all(t.state.reader_authenticated for t in tags)


def test_judge_response():
    key, nonce, tag_id = Key128(bytes(16)), bytes(8), 5
    good = AuthResponse(compute_token(key, DIR_TAG_TO_READER, nonce, tag_id), bytes(8))
    assert judge_response(Single(good), key, nonce, tag_id)[0] is Verdict.VERIFIED
    assert judge_response(Single(AuthResponse(bytes(16))), key, nonce, tag_id)[0] is Verdict.FAILED
    assert judge_response(Single(Busy()), key, nonce, tag_id)[0] is Verdict.BUSY
    assert judge_response(Silence(), key, nonce, tag_id)[0] is Verdict.TIMEOUT
    assert judge_response(Collision(), key, nonce, tag_id)[0] is Verdict.FAILED


def test_records_emitted_per_tag():
    ids, tags, ks = _field(2)
    proc = authenticate_sequential(ids, ks, Prng.from_seed(1), WORKED_TIMING)
    _, sim = _run(tags, proc)
    verdict_lines = [e for e in sim.trace if e.kind == "Verdict"]
    assert len(verdict_lines) == 2

