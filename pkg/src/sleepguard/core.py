"""Configuration, shared domain types and seeded network deployment."""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class ConfigError(ValueError):
    """Base class for configuration problems."""


class MissingKey(ConfigError):
    pass


class InvalidValue(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


# Named energy-constant presets. "standard" matches the defaults below.
ENERGY_PRESETS = {
    "standard": {"e_elec": 100e-9, "eps_fs": 20e-12, "eps_mp": 0.0015e-12},
    "alternate": {"e_elec": 90e-9, "eps_fs": 30e-12, "eps_mp": 0.0023e-12},
}

ATTACK_KINDS = ("SyncFlood", "SleepSyncReplay", "DummyDataForgedId")
ID_STRATEGIES = ("OwnId", "RandomForgedId")
ATTACK_TARGETS = ("OwnCluster", "Broadcast")
SCHEMES = ("defended", "undefended")
TX_POWER_MODES = ("per_bit", "fixed")


@dataclass(frozen=True)
class NetworkConfig:
    # topology
    field_width: float = 90.0
    field_height: float = 90.0
    node_count: int = 300
    tx_range_min: float = 150.0
    tx_range_max: float = 250.0
    # radio / energy
    packet_size: int = 512
    ctrl_packet_size: int = 16
    initial_energy: float = 45.0
    e_elec: float = 100e-9
    eps_fs: float = 20e-12
    eps_mp: float = 0.0015e-12
    idle_power: float = 51e-3
    rx_power: float = 55e-3
    tx_power: float = 51e-3
    sleep_power: float = 35e-6
    sensing_energy: float = 8e-8
    tx_power_mode: str = "per_bit"
    ch_data_rate: float = 250_000.0
    sim_time: float = 70.0
    # clustering
    ch_fraction_z: float = 0.1
    firefly_i0: float = 1.0
    firefly_gamma: float = 1.0 / 250.0**2
    firefly_beta: float = 1.0
    firefly_alpha: float = 0.1
    # round timing / duty cycle
    t_cf: float = 1.0
    t_dc: float = 2.0
    listen_period: float = 0.5
    sleep_period: float = 0.5
    sync_window: float = 0.1
    # sink planning
    data_rate_ds: float = 1000.0
    aggregation_xi: float = 0.9
    stop_points_k: int = 9
    dwell_units_s: int = 200
    slot_time_T: float = 0.01
    sink_speed: float = 0.0
    # security
    scheme: str = "defended"
    sync_count_threshold: int = 3
    sync_interval_threshold: float = 0.1
    rsa_prime_bits: int = 32
    # attack
    attack_ratio: float = 0.0
    attacker_sync_rate: float = 20.0
    attack_kind: str = "SyncFlood"
    id_strategy: str = "OwnId"
    attack_target: str = "OwnCluster"
    attack_interval: float = 0.0
    attack_burst: float = 1.0
    seed: int = 1

    def __post_init__(self) -> None:
        validate(self)

    @property
    def duty_period(self) -> float:
        return self.listen_period + self.sleep_period

    @property
    def attacker_count(self) -> int:
        # the small epsilon keeps e.g. 300 * 0.35 from landing at 104.99999
        return int(math.floor(self.node_count * self.attack_ratio + 1e-9))

    def replace(self, **changes) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise InvalidValue(msg)


def validate(cfg: NetworkConfig) -> None:
    _check(cfg.node_count >= 1, "node_count must be >= 1")
    _check(cfg.field_width > 0 and cfg.field_height > 0, "field dimensions must be > 0")
    _check(0.0 <= cfg.attack_ratio <= 1.0, f"attack_ratio {cfg.attack_ratio} not in [0, 1]")
    for name in ("eps_fs", "eps_mp", "e_elec", "initial_energy", "ch_data_rate",
                 "t_cf", "t_dc", "slot_time_T", "listen_period", "packet_size",
                 "ctrl_packet_size", "data_rate_ds", "attacker_sync_rate"):
        _check(getattr(cfg, name) > 0, f"{name} must be > 0")
    for name in ("idle_power", "rx_power", "tx_power", "sleep_power", "sensing_energy",
                 "sleep_period", "sim_time", "sink_speed", "attack_interval", "attack_burst",
                 "sync_interval_threshold", "firefly_gamma", "firefly_alpha", "firefly_beta"):
        _check(getattr(cfg, name) >= 0, f"{name} must be >= 0")
    _check(0.0 < cfg.aggregation_xi <= 1.0, "aggregation_xi must be in (0, 1]")
    _check(0.0 < cfg.ch_fraction_z < 1.0, "ch_fraction_z must be in (0, 1)")
    _check(cfg.firefly_i0 > 0, "firefly_i0 must be > 0")
    _check(0 < cfg.tx_range_min <= cfg.tx_range_max, "need 0 < tx_range_min <= tx_range_max")
    _check(0 < cfg.sync_window < cfg.listen_period, "need 0 < sync_window < listen_period")
    _check(cfg.stop_points_k >= 1, "stop_points_k must be >= 1")
    _check(cfg.dwell_units_s >= 1, "dwell_units_s must be >= 1")
    _check(cfg.sync_count_threshold >= 1, "sync_count_threshold must be >= 1")
    _check(cfg.rsa_prime_bits >= 8, "rsa_prime_bits must be >= 8")
    _check(cfg.scheme in SCHEMES, f"scheme must be one of {SCHEMES}")
    _check(cfg.id_strategy in ID_STRATEGIES, f"id_strategy must be one of {ID_STRATEGIES}")
    _check(cfg.attack_target in ATTACK_TARGETS, f"attack_target must be one of {ATTACK_TARGETS}")
    _check(cfg.attack_kind in ATTACK_KINDS, f"attack_kind must be one of {ATTACK_KINDS}")
    _check(cfg.tx_power_mode in TX_POWER_MODES, f"tx_power_mode must be one of {TX_POWER_MODES}")


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(NetworkConfig)}


def _convert(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
    except ValueError:
        raise InvalidValue(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config_text(source: str) -> dict:
    """Parse ``key=value`` lines into raw overrides (no validation of values)."""
    out: dict = {}
    for lineno, line in enumerate(source.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key != "energy_preset" and key not in _FIELD_TYPES:
            raise UnknownKey(f"line {lineno}: unknown key {key!r}")
        if raw == "":
            raise MissingKey(f"line {lineno}: no value given for {key!r}")
        out[key] = raw
    return out


def load_config(source: str = "", **overrides) -> NetworkConfig:
    """Build a validated config from key=value text.

    Keys not present keep their defaults. ``energy_preset`` (standard or
    alternate) is applied first so explicit energy keys still win.
    """
    raw = parse_config_text(source)
    values: dict = {}
    preset = raw.pop("energy_preset", None)
    if preset is not None:
        if preset not in ENERGY_PRESETS:
            raise InvalidValue(f"energy_preset must be one of {sorted(ENERGY_PRESETS)}")
        values.update(ENERGY_PRESETS[preset])
    for key, text in raw.items():
        values[key] = _convert(key, text)
    for key, value in overrides.items():
        if key not in _FIELD_TYPES:
            raise UnknownKey(f"unknown key {key!r}")
        values[key] = value
    return NetworkConfig(**values)


def dump_config(cfg: NetworkConfig) -> str:
    return "".join(f"{f.name}={getattr(cfg, f.name)!r}\n".replace("'", "")
                   for f in dataclasses.fields(cfg))


class Role(enum.Enum):
    NORMAL = "Normal"
    CLUSTER_HEAD = "ClusterHead"
    SINK = "Sink"


class RadioState(enum.Enum):
    SLEEP = "Sleep"
    IDLE = "Idle"
    RX = "Rx"
    TX = "Tx"


class PacketKind(enum.Enum):
    DATA = "Data"
    SYNC = "Sync"
    SYNC_AUTH = "SyncAuth"
    AUTH_TOKEN = "AuthToken"
    TDMA_SCHEDULE = "TdmaSchedule"
    KEY_HALF1 = "KeyHalf1"
    KEY_HALF2 = "KeyHalf2"
    COMMITMENT = "Commitment"
    ACK = "Ack"


BROADCAST = -1


@dataclass
class SensorNode:
    id: int
    position: tuple[float, float]
    role: Role = Role.NORMAL
    is_attacker: bool = False
    residual_energy: float = 0.0
    radio_state: RadioState = RadioState.IDLE
    cluster_id: int | None = None
    alive: bool = True
    tx_range: float = 0.0

    def distance_to(self, other: "SensorNode | tuple[float, float]") -> float:
        x, y = other.position if isinstance(other, SensorNode) else other
        return math.hypot(self.position[0] - x, self.position[1] - y)


@dataclass(frozen=True)
class Packet:
    kind: PacketKind
    src: int
    dst: int
    size: int
    timestamp: float
    payload: bytes = b""
    origin: int | None = None  # physical transmitter; differs from src for forged ids

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ValueError("packet size must be > 0")

    @property
    def bits(self) -> int:
        return self.size * 8

    @property
    def sender(self) -> int:
        return self.src if self.origin is None else self.origin


def data_packet(cfg: NetworkConfig, src: int, dst: int, t: float, **kw) -> Packet:
    return Packet(PacketKind.DATA, src, dst, cfg.packet_size, t, **kw)


def ctrl_packet(cfg: NetworkConfig, kind: PacketKind, src: int, dst: int, t: float, **kw) -> Packet:
    return Packet(kind, src, dst, cfg.ctrl_packet_size, t, **kw)


# Independent RNG streams; each (seed, stream, *keys) tuple gets its own generator
# so that the defended and undefended runs of one seed share their random draws.
STREAM_DEPLOY = 0
STREAM_ELECT = 1
STREAM_FIREFLY = 2
STREAM_TOKENS = 3
STREAM_CRYPTO = 4
STREAM_ATTACK = 5


def stream(seed: int, stream_id: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, stream_id, *keys]))


@dataclass
class Network:
    nodes: list[SensorNode]
    sink: SensorNode
    config: NetworkConfig

    @property
    def positions(self) -> np.ndarray:
        return np.array([n.position for n in self.nodes], dtype=float)

    @property
    def attacker_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.is_attacker]

    def alive_nodes(self) -> Iterable[SensorNode]:
        return (n for n in self.nodes if n.alive)


def deploy_network(config: NetworkConfig, seed: int | None = None) -> Network:
    seed = config.seed if seed is None else seed
    rng = stream(seed, STREAM_DEPLOY)
    n = config.node_count
    xs = rng.uniform(0.0, config.field_width, n)
    ys = rng.uniform(0.0, config.field_height, n)
    attackers = set(rng.choice(n, size=config.attacker_count, replace=False).tolist())
    nodes = [
        SensorNode(
            id=i,
            position=(float(xs[i]), float(ys[i])),
            is_attacker=i in attackers,
            residual_energy=config.initial_energy,
            tx_range=config.tx_range_max,
        )
        for i in range(n)
    ]
    sink = SensorNode(
        id=n,
        position=(config.field_width / 2.0, config.field_height / 2.0),
        role=Role.SINK,
        residual_energy=math.inf,
        tx_range=config.tx_range_max,
    )
    return Network(nodes=nodes, sink=sink, config=config)
