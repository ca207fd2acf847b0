"""Denial-of-sleep adversaries: sync floods, sleep-sync replay and forged-id dummy data."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ATTACK_KINDS, ATTACK_TARGETS, BROADCAST, ID_STRATEGIES, NetworkConfig, Packet, PacketKind, SensorNode


@dataclass(frozen=True)
class AttackProfile:
    kind: str = "SyncFlood"
    rate: float = 20.0
    target: str = "OwnCluster"
    id_strategy: str = "OwnId"
    interval: float = 0.0  # seconds between burst starts; 0 means continuous
    burst: float = 1.0  # active seconds at the start of each interval
    sync_size: int = 16
    data_size: int = 512

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise ValueError("attack rate must be > 0")
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.target not in ATTACK_TARGETS:
            raise ValueError(f"unknown attack target {self.target!r}")
        if self.id_strategy not in ID_STRATEGIES:
            raise ValueError(f"unknown id strategy {self.id_strategy!r}")

    @classmethod
    def from_config(cls, cfg: NetworkConfig) -> "AttackProfile":
        return cls(kind=cfg.attack_kind, rate=cfg.attacker_sync_rate, target=cfg.attack_target,
                   id_strategy=cfg.id_strategy, interval=cfg.attack_interval,
                   burst=cfg.attack_burst, sync_size=cfg.ctrl_packet_size,
                   data_size=cfg.packet_size)

    @property
    def packet_kind(self) -> PacketKind:
        return PacketKind.DATA if self.kind == "DummyDataForgedId" else PacketKind.SYNC

    @property
    def packet_size(self) -> int:
        return self.data_size if self.kind == "DummyDataForgedId" else self.sync_size

    @property
    def forges_ids(self) -> bool:
        return self.kind == "DummyDataForgedId" or self.id_strategy == "RandomForgedId"


def emission_times(profile: AttackProfile, now: float, window: float) -> np.ndarray:
    """Times on the global ``k / rate`` grid inside ``[now, now + window)`` when the attacker is active."""
    if window <= 0:
        return np.empty(0)
    eps = 1e-9
    k0 = math.ceil(now * profile.rate - eps)
    k1 = math.ceil((now + window) * profile.rate - eps)
    t = np.arange(k0, k1, dtype=np.int64) / profile.rate
    if profile.interval > 0:
        t = t[np.mod(t, profile.interval) < profile.burst - eps]
    return t


def forged_ids(rng: np.random.Generator, own_id: int, n_ids: int, count: int) -> np.ndarray:
    """Random identities other than ``own_id`` drawn from ``[0, n_ids)``."""
    if n_ids < 2:
        return np.full(count, own_id, dtype=np.int64)
    ids = rng.integers(0, n_ids - 1, size=count)
    return ids + (ids >= own_id)


def emission_arrays(profile: AttackProfile, attacker: SensorNode, now: float, window: float,
                    rng: np.random.Generator | None = None, n_ids: int = 0,
                    replay_src: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``(times, claimed source ids)`` of everything the attacker sends in the window."""
    if not (attacker.alive and attacker.is_attacker):
        return np.empty(0), np.empty(0, dtype=np.int64)
    times = emission_times(profile, now, window)
    if profile.kind == "SleepSyncReplay":
        if replay_src is None:
            return np.empty(0), np.empty(0, dtype=np.int64)
        return times, np.full(times.size, replay_src, dtype=np.int64)
    if profile.forges_ids:
        if rng is None:
            raise ValueError("forged identities need an rng")
        return times, forged_ids(rng, attacker.id, n_ids, times.size)
    return times, np.full(times.size, attacker.id, dtype=np.int64)


def attacker_emit(profile: AttackProfile, attacker: SensorNode, now: float, window: float = 1.0,
                  rng: np.random.Generator | None = None, n_ids: int = 0,
                  cluster_head: int | None = None, replay_src: int | None = None,
                  replay_payload: bytes = b"") -> list[Packet]:
    times, srcs = emission_arrays(profile, attacker, now, window, rng, n_ids, replay_src)
    if profile.target == "OwnCluster" and cluster_head is not None:
        dst = cluster_head
    else:
        dst = BROADCAST
    payload = replay_payload if profile.kind == "SleepSyncReplay" else b""
    return [Packet(profile.packet_kind, int(s), dst, profile.packet_size, float(t),
                   payload=payload, origin=attacker.id)
            for t, s in zip(times, srcs)]
