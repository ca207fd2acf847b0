import dataclasses

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sleepguard.core import NetworkConfig, Packet, PacketKind
from sleepguard.security import (
    AuthMode, AuthVerdict, ChAuthState, CiphertextTooLarge, IntegrityFailure, InterlockParty,
    InterlockResult, InterlockTimeout, MessageTooLarge, SinkAuthority, SinkVerdict, SyncVerdict,
    ToyWideBlockCipher, authenticate_member, check_sync_packet, commitment, egcd,
    interlock_exchange, is_probable_prime, material_value, modinv, randbelow, rsa_decrypt, rsa_encrypt,
    rsa_keygen, sink_verify,
)


def test_forced_prime_keys():
    k = rsa_keygen(0, primes=(61, 53), public_exponent=17)
    assert (k.m, k.phi, k.de) == (3233, 3120, 2753)
    k = rsa_keygen(0, primes=(3, 5), public_exponent=3)
    assert (k.m, k.phi, k.de) == (15, 8, 3)


def test_encrypt_decrypt_examples():
    assert rsa_encrypt(65, (3233, 17)) == 2790
    assert rsa_decrypt(2790, (3233, 2753)) == 65
    assert rsa_encrypt(0, (3233, 17)) == 0 and rsa_encrypt(1, (3233, 17)) == 1
    assert rsa_decrypt(1, (3233, 2753)) == 1
    with pytest.raises(MessageTooLarge):
        rsa_encrypt(3233, (3233, 17))
    with pytest.raises(CiphertextTooLarge):
        rsa_decrypt(3233, (3233, 2753))


def test_roundtrip_toy_key():
    rng = np.random.default_rng(0)
    for x in rng.integers(0, 3233, 1000):
        assert rsa_decrypt(rsa_encrypt(int(x), (3233, 17)), (3233, 2753)) == x


def test_exhaustive_roundtrip_16_bit_modulus():
    k = rsa_keygen(0, primes=(251, 241))
    assert k.m.bit_length() == 16
    assert all(rsa_decrypt(rsa_encrypt(x, k.public), k.private) == x for x in range(k.m))


@pytest.mark.parametrize("bits", [8, 16, 32, 64])
def test_generated_key_invariants(bits):
    for seed in range(5):
        k = rsa_keygen(bits, np.random.default_rng(seed))
        assert k.m == k.prim1 * k.prim2 and k.prim1 != k.prim2
        assert is_probable_prime(k.prim1) and is_probable_prime(k.prim2)
        assert k.prim1.bit_length() == bits
        assert 1 < k.en < k.phi and 1 < k.de < k.phi and k.en * k.de % k.phi == 1


def test_prime_residue_decryption_matches_plain():
    for k in (rsa_keygen(0, primes=(61, 53), public_exponent=17), rsa_keygen(0, primes=(251, 241))):
        assert all(k.decrypt(c) == rsa_decrypt(c, k.private) for c in range(k.m))
    k = rsa_keygen(128, np.random.default_rng(3))
    rng = np.random.default_rng(4)
    for _ in range(200):
        c = randbelow(rng, k.m)
        assert k.decrypt(c) == rsa_decrypt(c, k.private)
    with pytest.raises(CiphertextTooLarge):
        k.decrypt(k.m)


def test_primality_and_inverse_helpers():
    primes = {p for p in range(2, 2000) if all(p % d for d in range(2, int(p**0.5) + 1))}
    assert {n for n in range(2000) if is_probable_prime(n)} == primes
    assert not is_probable_prime(3215031751)  # strong pseudoprime to bases 2, 3, 5, 7
    g, x, y = egcd(240, 46)
    assert g == 2 and 240 * x + 46 * y == 2
    assert modinv(17, 3120) == 2753
    with pytest.raises(ValueError):
        modinv(6, 9)


def test_commitment_examples():
    assert commitment(7, 33) == 16
    assert commitment(0, 33) == 0 and commitment(1, 33) == 1
    assert commitment(32, 33) == 1


def _parties(seed=0):
    key = np.random.default_rng(seed).bytes(16)
    return InterlockParty(1, ToyWideBlockCipher(key)), InterlockParty(2, ToyWideBlockCipher(key))


def test_cipher_roundtrip():
    c = ToyWideBlockCipher(b"k" * 16)
    for n in (2, 3, 17, 64):
        data = bytes(range(n))
        assert c.decrypt(c.encrypt(data)) == data and c.encrypt(data) != data


def test_interlock_honest_trials():
    for seed in range(100):
        a, b = _parties(seed)
        mat = np.random.default_rng(seed + 1000).bytes(24)
        v = 3233
        res = interlock_exchange(a, b, mat, commitment(material_value(mat, v), v), v)
        assert res is InterlockResult.VERIFIED and b.received == mat
        kinds = [p.kind for p in a.packets]
        assert kinds == [PacketKind.KEY_HALF1, PacketKind.ACK, PacketKind.KEY_HALF2]


def test_interlock_wrong_commitment_fails():
    a, b = _parties()
    assert interlock_exchange(a, b, b"secret-material", 5, 3233) is InterlockResult.FAILED


def test_interlock_withheld_half_times_out():
    for seed in range(100):
        a, b = _parties(seed)
        rng = np.random.default_rng(seed)
        mat = rng.bytes(24)
        with pytest.raises(InterlockTimeout):
            interlock_exchange(a, b, mat, 0, 3233,
                               channel=lambda p: None if p.kind is PacketKind.KEY_HALF2 else p)
        assert b.received is None
        half1 = a.packets[0].payload
        guess = b.cipher.decrypt(half1 + rng.bytes(len(half1) + 4))
        assert mat not in guess


def test_interlock_missing_ack_times_out():
    a, b = _parties()
    with pytest.raises(InterlockTimeout):
        interlock_exchange(a, b, b"material", 0, 3233,
                           channel=lambda p: None if p.kind is PacketKind.ACK else p)
    assert len(a.packets) == 2


def test_interlock_tampered_half_fails_integrity():
    for seed in range(100):
        a, b = _parties(seed)
        rng = np.random.default_rng(seed)
        mat = rng.bytes(24)
        bit = int(rng.integers(0, 8))

        def flip(p):
            if p.kind is PacketKind.KEY_HALF2:
                body = bytearray(p.payload)
                body[int(rng.integers(0, len(body)))] ^= 1 << bit
                return dataclasses.replace(p, payload=bytes(body))
            return p

        with pytest.raises(IntegrityFailure):
            interlock_exchange(a, b, mat, 0, 3233, channel=flip)
        assert b.received is None


def _sync(src, t):
    return Packet(PacketKind.SYNC, src, 0, 16, t)


def test_sync_from_stranger_rejected():
    st_ = ChAuthState.for_cluster(0, [1, 2, 3], NetworkConfig())
    assert check_sync_packet(st_, _sync(9, 0.0), 0.0) is SyncVerdict.REJECT
    assert st_.mode is AuthMode.NORMAL


def test_slow_member_always_accepted():
    cfg = NetworkConfig()
    st_ = ChAuthState.for_cluster(0, [1, 2, 3], cfg)
    for k in range(50):
        t = k * cfg.duty_period
        assert check_sync_packet(st_, _sync(1, t), t) is SyncVerdict.ACCEPT
    assert st_.mode is AuthMode.NORMAL


def test_flooding_member_trips_on_first_crossing():
    cfg = NetworkConfig(sync_interval_threshold=0.0)
    st_ = ChAuthState.for_cluster(0, [1, 2, 3], cfg)
    n = 10 * cfg.sync_count_threshold
    verdicts = [check_sync_packet(st_, _sync(2, k * cfg.duty_period / n), k * cfg.duty_period / n)
                for k in range(n)]
    first = verdicts.index(SyncVerdict.ENTER_AUTH_MODE)
    assert first == cfg.sync_count_threshold
    assert verdicts.count(SyncVerdict.ENTER_AUTH_MODE) == 1
    assert st_.mode is AuthMode.AUTH


def test_fast_interval_trips():
    cfg = NetworkConfig(sync_interval_threshold=0.1)
    st_ = ChAuthState.for_cluster(0, [1], cfg)
    assert check_sync_packet(st_, _sync(1, 0.0), 0.0) is SyncVerdict.ACCEPT
    assert check_sync_packet(st_, _sync(1, 0.05), 0.05) is SyncVerdict.ENTER_AUTH_MODE


def test_forged_flood_counted_together():
    cfg = NetworkConfig(sync_interval_threshold=0.0, sync_count_threshold=3)
    st_ = ChAuthState.for_cluster(0, [1], cfg)
    out = [check_sync_packet(st_, _sync(100 + k, k * 0.01), k * 0.01) for k in range(5)]
    assert out[3] is SyncVerdict.ENTER_AUTH_MODE


def test_token_authentication():
    st_ = ChAuthState.for_cluster(0, [1, 2, 3], NetworkConfig())
    old = dict(st_.issue_tokens(np.random.default_rng(1)))
    st_.issue_tokens(np.random.default_rng(2))
    ok = Packet(PacketKind.SYNC_AUTH, 1, 0, 16, 0.0, payload=st_.issued_tokens[1])
    assert authenticate_member(st_, ok) is AuthVerdict.VALID
    stale = Packet(PacketKind.SYNC_AUTH, 2, 0, 16, 0.0, payload=old[2])
    assert authenticate_member(st_, stale) is AuthVerdict.FLAGGED
    forged = Packet(PacketKind.SYNC_AUTH, 77, 0, 16, 0.0)
    assert authenticate_member(st_, forged) is AuthVerdict.FLAGGED
    assert st_.flagged == {2, 77}
    # flagged identities stay flagged and are rejected from then on
    again = Packet(PacketKind.SYNC_AUTH, 2, 0, 16, 0.0, payload=st_.issued_tokens[2])
    assert authenticate_member(st_, again) is AuthVerdict.FLAGGED
    assert check_sync_packet(st_, _sync(2, 5.0), 5.0) is SyncVerdict.REJECT


@pytest.fixture(scope="module")
def sink():
    s = SinkAuthority(rsa_keygen(32, np.random.default_rng(5)))
    s.register(4, 123456789, b"k" * 16)
    return s


def test_sink_accepts_registered_head(sink):
    assert sink_verify(sink.make_report(4, b"aggregate", 123456789), sink) is SinkVerdict.ACCEPTED


def test_sink_rejects_guessed_secret(sink):
    rng = np.random.default_rng(9)
    f = sink.registry[4]
    for _ in range(100):
        g = 2 + randbelow(rng, sink.v - 4)
        if g in (f, sink.v - f):
            continue
        assert sink_verify(sink.make_report(4, b"aggregate", g), sink) is SinkVerdict.REJECTED


def test_sink_rejects_flipped_payload_and_unknown_head(sink):
    rep = sink.make_report(4, b"aggregate", 123456789)
    bad = dataclasses.replace(rep, payload=b"aggregatf")
    assert sink_verify(bad, sink) is SinkVerdict.REJECTED
    assert sink_verify(dataclasses.replace(rep, ch_id=5), sink) is SinkVerdict.REJECTED


@given(events=st.lists(st.tuples(st.integers(0, 5), st.booleans()), max_size=40))
def test_flag_set_only_grows(events):
    st_ = ChAuthState.for_cluster(0, range(5), NetworkConfig())
    st_.issue_tokens(np.random.default_rng(0))
    prev = set()
    for src, honest in events:
        tok = st_.issued_tokens.get(src, b"") if honest else b"\x00"
        authenticate_member(st_, Packet(PacketKind.SYNC_AUTH, src, 0, 16, 0.0, payload=tok))
        assert prev <= st_.flagged
        prev = set(st_.flagged)
