"""Two-level denial-of-sleep defence.

Cluster level: heads vet synchronisation packets from their members and
switch the cluster into token authentication when a sender floods. Sink
level: textbook RSA, the ``F**2 mod V`` possession commitment and an
interlock key hand-off between the mobile sink and cluster heads.

None of this is production cryptography: no padding, no constant-time code.
"""
from __future__ import annotations

import enum
import hashlib
import hmac
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import NetworkConfig, Packet, PacketKind


class MessageTooLarge(ValueError):
    pass


class CiphertextTooLarge(ValueError):
    pass


# --------------------------------------------------------------------- RSA

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_probable_prime(n: int, rng: np.random.Generator | None = None, extra_rounds: int = 16) -> bool:
    """Miller-Rabin; deterministic below 3.3e24, probabilistic above."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1

    def witness(a: int) -> bool:
        x = pow(a, d, n)
        if x in (1, n - 1):
            return False
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                return False
        return True

    if any(witness(a) for a in _MR_BASES):
        return False
    if n < 3_317_044_064_679_887_385_961_981:
        return True
    rng = rng or np.random.default_rng(n & 0xFFFFFFFF)
    for _ in range(extra_rounds):
        a = 2 + randbelow(rng, n - 3)
        if witness(a):
            return False
    return True


def randbits(rng: np.random.Generator, bits: int) -> int:
    nbytes = (bits + 7) // 8
    value = int.from_bytes(rng.bytes(nbytes), "big")
    return value >> (nbytes * 8 - bits)


def randbelow(rng: np.random.Generator, n: int) -> int:
    bits = max(1, n.bit_length())
    while True:
        v = randbits(rng, bits)
        if v < n:
            return v


def random_prime(bits: int, rng: np.random.Generator) -> int:
    # top two bits set so the product of two such primes has exactly 2*bits bits
    while True:
        cand = randbits(rng, bits) | (0b11 << (bits - 2)) | 1
        if is_probable_prime(cand, rng):
            return cand


def egcd(a: int, b: int) -> tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def modinv(a: int, m: int) -> int:
    g, x, _ = egcd(a % m, m)
    if g != 1:
        raise ValueError(f"{a} has no inverse modulo {m}")
    return x % m


@dataclass(frozen=True)
class RsaKeyPair:
    m: int
    en: int
    de: int
    prim1: int
    prim2: int

    @property
    def phi(self) -> int:
        return (self.prim1 - 1) * (self.prim2 - 1)

    @property
    def public(self) -> tuple[int, int]:
        return self.m, self.en

    @property
    def private(self) -> tuple[int, int]:
        return self.m, self.de

    @property
    def bits(self) -> int:
        return self.m.bit_length()

    def decrypt(self, c: int) -> int:
        """Same result as ``rsa_decrypt(c, self.private)``, via the two prime residues."""
        if not 0 <= c < self.m:
            raise CiphertextTooLarge(f"ciphertext must satisfy 0 <= c < {self.m}")
        p, q = self.prim1, self.prim2
        mp = pow(c % p, self.de % (p - 1), p)
        mq = pow(c % q, self.de % (q - 1), q)
        h = (mp - mq) * pow(q, -1, p) % p
        return mq + h * q


def rsa_keygen(prime_bits: int, rng: np.random.Generator | None = None,
               public_exponent: int | None = None,
               primes: tuple[int, int] | None = None) -> RsaKeyPair:
    """Generate (or assemble from ``primes``) a key pair.

    The public exponent defaults to 65537 when it is valid for the modulus,
    otherwise a random exponent coprime with phi is drawn.
    """
    if primes is None:
        if prime_bits < 8:
            raise ValueError("prime_bits must be >= 8")
        rng = rng if rng is not None else np.random.default_rng()
        p = random_prime(prime_bits, rng)
        q = random_prime(prime_bits, rng)
        while q == p:
            q = random_prime(prime_bits, rng)
    else:
        p, q = primes
    phi = (p - 1) * (q - 1)
    if public_exponent is not None:
        en = public_exponent
        if not (1 < en < phi) or math.gcd(en, phi) != 1:
            raise ValueError(f"public exponent {en} invalid for phi={phi}")
    elif 65537 < phi and math.gcd(65537, phi) == 1:
        en = 65537
    else:
        rng = rng if rng is not None else np.random.default_rng(phi)
        while True:
            en = 3 + randbelow(rng, phi - 3)
            if math.gcd(en, phi) == 1:
                break
    return RsaKeyPair(m=p * q, en=en, de=modinv(en, phi), prim1=p, prim2=q)


def rsa_encrypt(m1: int, public_key: tuple[int, int]) -> int:
    m, en = public_key
    if not 0 <= m1 < m:
        raise MessageTooLarge(f"message must satisfy 0 <= m1 < {m}")
    return pow(m1, en, m)


def rsa_decrypt(c: int, private_key: tuple[int, int]) -> int:
    m, de = private_key
    if not 0 <= c < m:
        raise CiphertextTooLarge(f"ciphertext must satisfy 0 <= c < {m}")
    return pow(c, de, m)


def commitment(f: int, v: int) -> int:
    if v <= 1:
        raise ValueError("v must be > 1")
    return f * f % v


# ------------------------------------------------------- symmetric cipher

class BlockCipher:
    """Interface for the pluggable symmetric cipher used by the interlock."""

    def encrypt(self, data: bytes) -> bytes:
        raise NotImplementedError

    def decrypt(self, data: bytes) -> bytes:
        raise NotImplementedError


class ToyWideBlockCipher(BlockCipher):
    """Four-round Feistel over the whole message with SHAKE-256 round functions.

    Every output byte depends on every input byte, so half a ciphertext says
    nothing useful about the plaintext. Simulation use only.
    """

    rounds = 4

    def __init__(self, key: bytes):
        self.key = bytes(key)

    def _f(self, rnd: int, data: bytes, n: int) -> bytes:
        return hashlib.shake_256(self.key + bytes([rnd]) + data).digest(n)

    @staticmethod
    def _xor(a: bytes, b: bytes) -> bytes:
        return bytes(x ^ y for x, y in zip(a, b))

    def encrypt(self, data: bytes) -> bytes:
        if len(data) < 2:
            raise ValueError("wide-block cipher needs at least 2 bytes")
        h = len(data) // 2
        left, right = data[:h], data[h:]
        for rnd in range(self.rounds):
            if rnd % 2 == 0:
                right = self._xor(right, self._f(rnd, left, len(right)))
            else:
                left = self._xor(left, self._f(rnd, right, len(left)))
        return left + right

    def decrypt(self, data: bytes) -> bytes:
        if len(data) < 2:
            raise ValueError("wide-block cipher needs at least 2 bytes")
        h = len(data) // 2
        left, right = data[:h], data[h:]
        for rnd in reversed(range(self.rounds)):
            if rnd % 2 == 0:
                right = self._xor(right, self._f(rnd, left, len(right)))
            else:
                left = self._xor(left, self._f(rnd, right, len(left)))
        return left + right


# -------------------------------------------------------------- interlock

class InterlockError(RuntimeError):
    pass


class InterlockTimeout(InterlockError):
    pass


class IntegrityFailure(InterlockError):
    pass


class InterlockResult(enum.Enum):
    VERIFIED = "Verified"
    FAILED = "Failed"


TAG_BYTES = 8


@dataclass
class InterlockParty:
    node_id: int
    cipher: BlockCipher
    received: Optional[bytes] = None
    packets: list = field(default_factory=list)


Channel = Callable[[Packet], Optional[Packet]]


def _lossless(pkt: Packet) -> Packet:
    return pkt


def material_value(material: bytes, modulus: int) -> int:
    return int.from_bytes(material, "big") % modulus


def interlock_exchange(sender: InterlockParty, receiver: InterlockParty, key_material: bytes,
                       expected_commitment: int, modulus: int,
                       channel: Channel | None = None, now: float = 0.0,
                       ctrl_size: int = 16) -> InterlockResult:
    """Hand ``key_material`` over in two ciphertext halves.

    The second half is released only after the receiver acknowledges the
    first. The receiver decrypts once both halves are in, checks the
    integrity tag and compares ``material**2 mod modulus`` with the expected
    commitment. Raises ``InterlockTimeout`` when a half or the ack never
    arrives and ``IntegrityFailure`` when the reassembled blob fails its tag.
    """
    channel = channel or _lossless
    tag = hashlib.sha256(key_material).digest()[:TAG_BYTES]
    blob = sender.cipher.encrypt(key_material + tag)
    cut = len(blob) // 2
    half1, half2 = blob[:cut], blob[cut:]
    size = max(ctrl_size, len(half1))

    def send(kind, src, dst, payload, size_=size):
        pkt = Packet(kind, src, dst, size_, now, payload=payload)
        sent = channel(pkt)
        for party in (sender, receiver):
            party.packets.append(pkt)
        return sent

    got1 = send(PacketKind.KEY_HALF1, sender.node_id, receiver.node_id, half1)
    if got1 is None:
        raise InterlockTimeout("first half never arrived")
    ack = send(PacketKind.ACK, receiver.node_id, sender.node_id, b"", ctrl_size)
    if ack is None:
        raise InterlockTimeout("no acknowledgement for the first half")
    got2 = send(PacketKind.KEY_HALF2, sender.node_id, receiver.node_id, half2,
                max(ctrl_size, len(half2)))
    if got2 is None:
        raise InterlockTimeout("second half withheld")
    plain = receiver.cipher.decrypt(got1.payload + got2.payload)
    material, got_tag = plain[:-TAG_BYTES], plain[-TAG_BYTES:]
    if not hmac.compare_digest(hashlib.sha256(material).digest()[:TAG_BYTES], got_tag):
        raise IntegrityFailure("reassembled key failed its integrity tag")
    receiver.received = material
    if commitment(material_value(material, modulus), modulus) == expected_commitment:
        return InterlockResult.VERIFIED
    return InterlockResult.FAILED


# ---------------------------------------------------- cluster-level vetting

class AuthMode(enum.Enum):
    NORMAL = "Normal"
    AUTH = "AuthMode"


class SyncVerdict(enum.Enum):
    ACCEPT = "Accept"
    REJECT = "Reject"
    ENTER_AUTH_MODE = "EnterAuthMode"


class AuthVerdict(enum.Enum):
    VALID = "Valid"
    FLAGGED = "Flagged"


UNKNOWN_SENDER = -2


@dataclass
class ChAuthState:
    ch_id: int
    roster: frozenset
    window: float = 1.0
    count_threshold: int = 3
    interval_threshold: float = 0.1
    sync_counts: dict = field(default_factory=dict)
    last_sync_time: dict = field(default_factory=dict)
    mode: AuthMode = AuthMode.NORMAL
    issued_tokens: dict = field(default_factory=dict)
    flagged: set = field(default_factory=set)
    authenticated: set = field(default_factory=set)
    trigger_time: float | None = None

    @classmethod
    def for_cluster(cls, ch_id: int, members, config: NetworkConfig) -> "ChAuthState":
        return cls(ch_id=ch_id, roster=frozenset(members), window=config.duty_period,
                   count_threshold=config.sync_count_threshold,
                   interval_threshold=config.sync_interval_threshold)

    def _trips(self, key: int, now: float) -> bool:
        q = self.sync_counts.setdefault(key, deque())
        last = self.last_sync_time.get(key)
        while q and q[0] <= now - self.window:
            q.popleft()
        q.append(now)
        self.last_sync_time[key] = now
        too_fast = last is not None and now - last < self.interval_threshold
        return too_fast or len(q) > self.count_threshold

    def issue_tokens(self, rng: np.random.Generator, nbytes: int = 8) -> dict:
        for member in sorted(self.roster):
            self.issued_tokens[member] = rng.bytes(nbytes)
        return self.issued_tokens


def check_sync_packet(state: ChAuthState, pkt: Packet, now: float,
                      config: NetworkConfig | None = None) -> SyncVerdict:
    """Level-one vetting of a synchronisation (or other suspicious) packet.

    Unknown senders are rejected but still counted together, so a flood of
    forged identities also trips the detector.
    """
    if pkt.src in state.flagged:
        return SyncVerdict.REJECT
    member = pkt.src in state.roster
    tripped = state._trips(pkt.src if member else UNKNOWN_SENDER, now)
    if tripped and state.mode is AuthMode.NORMAL:
        state.mode = AuthMode.AUTH
        state.trigger_time = now
        return SyncVerdict.ENTER_AUTH_MODE
    return SyncVerdict.ACCEPT if member else SyncVerdict.REJECT


def authenticate_member(state: ChAuthState, pkt: Packet) -> AuthVerdict:
    issued = state.issued_tokens.get(pkt.src)
    if issued is not None and pkt.src not in state.flagged and hmac.compare_digest(pkt.payload, issued):
        state.authenticated.add(pkt.src)
        return AuthVerdict.VALID
    state.flagged.add(pkt.src)
    return AuthVerdict.FLAGGED


# ------------------------------------------------------ sink-level checks

class SinkVerdict(enum.Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class ChReport:
    ch_id: int
    payload: bytes
    commitment: int
    envelope: int


def _digest(payload: bytes, f: int, modulus: int) -> int:
    width = (modulus.bit_length() + 7) // 8
    h = hashlib.sha256(payload + f.to_bytes(width, "big")).digest()
    return int.from_bytes(h, "big") % modulus


@dataclass
class SinkAuthority:
    """Key material held by the mobile sink: its RSA pair and each node's registered secret."""

    keys: RsaKeyPair
    registry: dict = field(default_factory=dict)  # node id -> F
    pairwise: dict = field(default_factory=dict)  # node id -> symmetric key bytes

    @property
    def v(self) -> int:
        return self.keys.m

    def register(self, node_id: int, f: int, pairwise_key: bytes) -> None:
        self.registry[node_id] = f % self.v
        self.pairwise[node_id] = pairwise_key

    def make_report(self, ch_id: int, payload: bytes, f: int) -> ChReport:
        """What a head holding secret ``f`` sends alongside its aggregate."""
        return make_report(ch_id, payload, f, self.keys.public)


def make_report(ch_id: int, payload: bytes, f: int, sink_public: tuple[int, int]) -> ChReport:
    v, _ = sink_public
    return ChReport(ch_id=ch_id, payload=payload, commitment=commitment(f % v, v),
                    envelope=rsa_encrypt(_digest(payload, f % v, v), sink_public))


def sink_verify(report: ChReport, sink: SinkAuthority) -> SinkVerdict:
    f = sink.registry.get(report.ch_id)
    if f is None:
        return SinkVerdict.REJECTED
    if report.commitment != commitment(f, sink.v):
        return SinkVerdict.REJECTED
    try:
        opened = rsa_decrypt(report.envelope, sink.keys.private)
    except CiphertextTooLarge:
        return SinkVerdict.REJECTED
    if opened != _digest(report.payload, f, sink.v):
        return SinkVerdict.REJECTED
    return SinkVerdict.ACCEPTED
