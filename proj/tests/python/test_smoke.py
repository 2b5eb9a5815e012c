import random

import pytest

import geokey
import reference

GOLDEN = "00cccf4b5a7069cda300e4d957bc9e1a844a5bba3183918609cb023458d7bfb1"


def test_geocell_basics():
    assert geokey.CELL_COUNT == 25_920_000
    assert geokey.encode(0, 0) == "6FG222"
    assert geokey.encode(-90, -180) == "222222"
    assert geokey.encode(89.99999, 179.99999) == "CVXXXX"
    south, west, north, east = geokey.decode("6FG224")
    assert (south, west) == pytest.approx((0.0, 0.10))
    assert north - south == pytest.approx(0.05)
    assert len(geokey.neighbors("6FG222")) == 8
    assert geokey.geocode_at(0) == "222222"
    assert geokey.geocode_at(geokey.CELL_COUNT - 1) == "CVXXXX"
    square = [(0, 0), (0, 1), (1, 1), (1, 0)]
    assert len(geokey.cover_area(square, rule="interior")) == 400
    assert geokey.cover_route([(0.025, 0.01), (0.025, 0.14)]) == ["6FG222", "6FG223", "6FG224"]


def test_encode_matches_openlocationcode():
    olc = pytest.importorskip("openlocationcode.openlocationcode")
    rng = random.Random(4)
    for _ in range(2000):
        lat, lng = rng.uniform(-89.9, 89.9), rng.uniform(-179.9, 179.9)
        assert geokey.encode(lat, lng) == olc.encode(lat, lng, 10)[:6]


def test_rc5_against_oracle():
    rng = random.Random(1)
    for rounds in (12, 20):
        for _ in range(50):
            key = bytes(rng.randrange(256) for _ in range(rng.randrange(1, 256)))
            block = bytes(rng.randrange(256) for _ in range(8))
            schedule = reference.rc5_schedule(key, rounds)
            ct = geokey.rc5_encrypt_block(key, block, rounds)
            assert ct == reference.rc5_encrypt(block, schedule, rounds)
            assert geokey.rc5_decrypt_block(key, ct, rounds) == block
    assert geokey.rc5_encrypt_block(bytes(16), bytes(8), 12).hex() == "21a5dbee154b8f6d"


def test_cbc_mac_against_oracle():
    rng = random.Random(2)
    for _ in range(50):
        key = bytes(rng.randrange(256) for _ in range(32))
        msg = bytes(rng.randrange(256) for _ in range(rng.randrange(1, 40)))
        schedule = reference.rc5_schedule(key, 20)
        expect = reference.cbc_mac(msg, schedule, 20, 64)
        assert geokey.cbc_mac(key, msg, 64) == int.from_bytes(expect, "big")


def test_derive_against_oracle():
    assert geokey.derive(bytes(255), "222222", 0, 60).hex() == GOLDEN
    rng = random.Random(3)
    master = bytes(rng.randrange(256) for _ in range(255))
    for _ in range(20):
        code = geokey.geocode_at(rng.randrange(geokey.CELL_COUNT))
        start = rng.randrange(20000)
        end = start + rng.randrange(1, 61)
        assert geokey.derive(master, code, start, end) == reference.derive(master, code, start, end)
    wide = geokey.derive(master, "6FG222", 0, 60, bits=512)
    assert len(wide) == 64
    assert geokey.tub_key(wide) == geokey.derive(master, "6FG222", 0, 60)
    assert geokey.epochs_for(0, 150) == [(0, 60), (60, 120), (120, 150)]


def test_shamir_round_trip():
    master = bytes(range(255))
    shares = geokey.split(master)
    assert len(shares) == 11
    assert geokey.combine(random.Random(5).sample(shares, 6)) == master
    with pytest.raises(geokey.GeokeyError, match="threshold-not-met"):
        geokey.combine(shares[:5])


def test_keystore_and_protocol():
    master = bytes(255)
    bundle = geokey.issue_bundle(master, ["6FG222", "6FG223"], 0, 90)
    assert len(bundle) == geokey.size_report(4)
    store = geokey.KeyStore()
    assert store.import_bundle(bundle) == 4
    key, start, end = store.lookup("6FG223", 70)
    assert (start, end) == (60, 90)
    assert store.lookup("6FG224", 0) is None
    exported = store.export_bundle()
    assert len(exported) == len(bundle)
    again = geokey.KeyStore()
    assert again.import_bundle(exported) == 4
    for code, day in (("6FG222", 10), ("6FG223", 70)):
        assert again.lookup(code, day) == store.lookup(code, day)
    assert store.prune_expired(60) == 2
    assert len(store) == 2

    challenge = geokey.challenge_bytes(123456, 789)
    assert challenge.hex() == "4003c4800315"
    golden_key = bytes.fromhex(GOLDEN)
    schedule = reference.rc5_schedule(golden_key, 20)
    expect = reference.cbc_mac(challenge + b"222222", schedule, 20, 32)
    assert geokey.response_mac(challenge, "222222", golden_key) == int.from_bytes(expect, "big")

    with pytest.raises(geokey.GeokeyError):
        store.import_bundle(bundle[:-1] + bytes([bundle[-1] ^ 1]))


def test_scenario(tmp_path):
    (tmp_path / "keys.geok").write_bytes(geokey.issue_bundle(bytes(255), ["6FG222", "6FG223"], 0, 60))
    text = "\n".join([
        "geokey-scenario 1",
        "duration_s 600",
        "challenge_interval_s 60",
        "asset name=v role=verifier keystore=keys.geok route=0.025,0.025",
        "asset name=p role=prover keystore=keys.geok route=0.025,0.07",
        "asset name=f role=forger route=0.02,0.03",
    ])
    m = geokey.run_scenario(text, str(tmp_path))
    assert m["challenges_sent"] == 20
    assert m["accepted"] == 10
    assert m["rejected_bad_mac"] == 10
