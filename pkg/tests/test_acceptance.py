"""Acceptance gate.  Each test is one criterion; the terminal summary prints
a PASS/FAIL line for each."""

import dataclasses
import random
import time

import pytest

from rfidauth.adversary import clone_attack, memory_probe, replay_attack, tracking_probe
from rfidauth.crypto import Key128, aes128_decrypt, aes128_encrypt
from rfidauth.engine import power_check, run_scenario
from rfidauth.reader import Keystore, Verdict
from rfidauth.scenario import Scenario, parse_scenario
from rfidauth.tag import TagConfig
from rfidauth.timing import Direction, PowerModel, TimingModel, frame_airtime
from rfidauth.wire import AuthRequestAR, AuthResponse, ResponseRequestRR

from conftest import ROOT, WORKED_TIMING
from oracles import singulate, split_schedule


def random_timing(rng, allow_zero_latency=True):
    return TimingModel(
        reader_bits_per_sec=rng.choice([26_700, 53_000, 106_000, 10**6]),
        tag_bits_per_sec=rng.choice([26_700, 40_000, 160_000, 10**6]),
        frame_overhead_us=rng.randint(0, 500),
        tag_clock_hz=rng.choice([100_000, 847_000, 1_000_000, 13_560_000]),
        aes_cycles=0 if allow_zero_latency and rng.random() < 0.15 else rng.randint(1, 3000),
        reply_deadline_us=rng.randint(200, 5000),
    )


def random_key(rng):
    return Key128(rng.randbytes(16))


@pytest.mark.criterion(1, "AES-128 FIPS-197 vectors and 10^4 round-trips")
def test_c1_aes_conformance():
    start = time.perf_counter()
    vectors = [
        ("2b7e151628aed2a6abf7158809cf4f3c", "3243f6a8885a308d313198a2e0370734", "3925841d02dc09fbdc118597196a0b32"),
        ("000102030405060708090a0b0c0d0e0f", "00112233445566778899aabbccddeeff", "69c4e0d86a7b0430d8cdb78070b4c55a"),
    ]
    for key, pt, ct in vectors:
        assert aes128_encrypt(bytes.fromhex(key), bytes.fromhex(pt)).hex() == ct
        assert aes128_decrypt(bytes.fromhex(key), bytes.fromhex(ct)).hex() == pt
    rng = random.Random(0xAE5)
    for _ in range(10_000):
        key, block = rng.randbytes(16), rng.randbytes(16)
        assert aes128_decrypt(key, aes128_encrypt(key, block)) == block
    assert time.perf_counter() - start < 5


@pytest.mark.criterion(2, "tree walk equals brute-force singulation on 1000 scenarios")
def test_c2_anticollision_oracle():
    start = time.perf_counter()
    rng = random.Random(0x5106)
    key = Key128(bytes(16))
    sizes = [0, 1, 64] + [rng.randint(0, 64) for _ in range(997)]
    for seed, n in enumerate(sizes):
        ids = rng.sample(range(1 << 56), n)
        res = run_scenario(Scenario(tuple(TagConfig(i, key) for i in ids), mode="inventory", seed=seed))
        found, queries = singulate(ids)
        assert set(res.found) == set(found)
        assert res.found == found
        assert res.metrics.queries == queries, (seed, n)
    assert time.perf_counter() - start < 30


def _auth_pair(scenario):
    seq = run_scenario(dataclasses.replace(scenario, mode="seq-auth", auth_scheme="split"))
    inter = run_scenario(dataclasses.replace(scenario, mode="interleaved-auth"))
    return seq, inter


@pytest.mark.criterion(3, "interleaving gain: 12000 vs 24000 us, never slower over 200 configs")
def test_c3_interleaving_gain():
    demo = parse_scenario((ROOT / "scenarios" / "demo3.json").read_text())
    assert demo.timing == WORKED_TIMING
    seq, inter = _auth_pair(demo)
    assert (inter.auth_time_us, seq.auth_time_us) == (12000, 24000)

    rng = random.Random(0x1417)
    saw_equal = saw_zero_latency = 0
    for seed in range(200):
        n = 1 if seed % 10 == 0 else rng.randint(1, 16)
        timing = random_timing(rng)
        ids = rng.sample(range(1 << 56), n)
        s = Scenario(tuple(TagConfig(i, random_key(rng)) for i in ids), seed=seed, timing=timing)
        seq, inter = _auth_pair(s)
        assert seq.inventory_time_us == inter.inventory_time_us
        # the auth phase matches a closed-form walk of both schedules
        ar = frame_airtime(AuthRequestAR(0, bytes(8)), Direction.READER_TO_TAG, timing)
        rr = (frame_airtime(ResponseRequestRR(0), Direction.READER_TO_TAG, timing)
              + frame_airtime(AuthResponse(bytes(16), bytes(8)), Direction.TAG_TO_READER, timing))
        assert (seq.auth_time_us, inter.auth_time_us) == split_schedule(n, ar, rr, timing.aes_latency_us)
        assert inter.metrics.total_time_us <= seq.metrics.total_time_us
        if n == 1 or timing.aes_latency_us == 0:
            assert inter.metrics.total_time_us == seq.metrics.total_time_us
            saw_equal += 1
        else:
            assert inter.metrics.total_time_us < seq.metrics.total_time_us
        saw_zero_latency += timing.aes_latency_us == 0
        assert set(seq.verdicts.values()) == {Verdict.VERIFIED}
    assert saw_equal and saw_zero_latency


@pytest.mark.criterion(4, "sequential and interleaved verdicts agree on 200 mixed scenarios")
def test_c4_verdict_consistency():
    rng = random.Random(0x4E7)
    mixed = 0
    for seed in range(200):
        n = rng.randint(1, 12)
        ids = rng.sample(range(1 << 56), n)
        tags = tuple(TagConfig(i, random_key(rng)) for i in ids)
        honest = {t.id: rng.random() < 0.6 for t in tags}
        keystore = Keystore({t.id: t.key if honest[t.id] else random_key(rng) for t in tags})
        s = Scenario(tags, seed=seed, timing=random_timing(rng), keystore=keystore)
        seq, inter = _auth_pair(s)
        assert seq.verdicts == inter.verdicts
        expected = {i: Verdict.VERIFIED if honest[i] else Verdict.FAILED for i in ids}
        assert seq.verdicts == expected
        mixed += len(set(expected.values())) == 2
    assert mixed >= 50


@pytest.mark.criterion(5, "replay 0/10^4, clone 0/10^4, memory always denied, aliases unlinkable")
def test_c5_security_properties():
    start = time.perf_counter()
    rng = random.Random(0x5EC)
    tags = tuple(TagConfig(i, random_key(rng)) for i in rng.sample(range(1 << 56), 4))
    recorded = run_scenario(Scenario(tags, mode="seq-auth", seed=1))
    assert set(recorded.verdicts.values()) == {Verdict.VERIFIED}
    keystore = Keystore({t.id: t.key for t in tags})

    replay = replay_attack(recorded.trace, keystore, 10_000, 2)
    assert (replay.trials, replay.successes) == (10_000, 0)

    clone = clone_attack(tags[0].id, keystore, 10_000, 3)
    assert (clone.trials, clone.successes) == (10_000, 0)

    memory = memory_probe(1000, 4)
    assert memory.successes == 0 and memory.notes["denied"] == 1000

    tracking = tracking_probe(1000, True, 5)
    assert tracking.successes == 0
    assert tracking.notes["memory_denied"] == 1000 and tracking.notes["memory_leaked"] == 0
    assert time.perf_counter() - start < 60


@pytest.mark.criterion(6, "power budget 10 uA flags a 12 uA compute phase and passes 8 uA")
def test_c6_power_check():
    tags = tuple(TagConfig(i, Key128(bytes([i]) * 16)) for i in (1, 2))
    trace = run_scenario(Scenario(tags, mode="interleaved-auth", seed=1, timing=WORKED_TIMING)).trace
    hot = power_check(trace, PowerModel(compute_current_uA=12.0, budget_uA=10.0))
    assert hot.violations and all(v.phase == "compute" and v.current_uA == 12.0 for v in hot.violations)
    assert {v.actor for v in hot.violations} == {"tag:00000000000001", "tag:00000000000002"}
    cool = power_check(trace, PowerModel(compute_current_uA=8.0, budget_uA=10.0))
    assert cool.violations == []


@pytest.mark.criterion(7, "same seed gives byte-identical trace and metrics files")
def test_c7_determinism(tmp_path):
    from rfidauth.cli import main

    demo = ROOT / "scenarios" / "demo3.json"
    outputs = []
    for k in range(2):
        m, t = tmp_path / f"m{k}.json", tmp_path / f"t{k}.txt"
        assert main(["run", "--scenario", str(demo), "--out", str(m), "--trace", str(t)]) == 0
        outputs.append((m.read_bytes(), t.read_bytes()))
    assert outputs[0] == outputs[1]

    rng = random.Random(0xD37)
    for seed in range(100):
        ids = rng.sample(range(1 << 56), rng.randint(0, 10))
        tags = tuple(TagConfig(i, random_key(rng), alias_mode=rng.random() < 0.2,
                               require_reader_auth=rng.random() < 0.5) for i in ids)
        s = Scenario(tags, mode=rng.choice(["inventory", "seq-auth", "interleaved-auth", "mutual"]),
                     seed=rng.getrandbits(64), timing=random_timing(rng),
                     auth_scheme=rng.choice(["split", "challenge"]))
        a, b = run_scenario(s), run_scenario(s)
        assert a.trace.serialize().encode() == b.trace.serialize().encode()
        assert a.metrics.to_json().encode() == b.metrics.to_json().encode()
