"""Discrete-event simulation of clustered, duty-cycled rounds under denial-of-sleep attack.

Each round has three phases: cluster formation, duty-cycled data collection
and mobile-sink relay. Phase boundaries, duty-cycle toggles, sink arrivals
and node deaths travel through a time-ordered event queue. Inside a phase,
packet traffic is resolved in bulk and the energy it costs is settled into
the node ledgers when the phase ends.

Event-log records are dicts ``{time, kind, node, detail}``:

    Deploy      node's initial energy and ground-truth attacker label
    RoundPhaseChange / DutyCycleToggle / SinkArrival / NodeDeath
    Elected     cluster heads of the round (node = -1, detail lists ids)
    DataSent    an honest member sent one data packet (detail: ch, aligned)
    AuthMode    a head switched its cluster into token authentication
    Vetted      a node went through head interlock or token authentication
    Flagged     a node was marked malicious (never cleared)
    SinkReport  the sink's verdict on a head's relayed aggregate
    PlanInfeasible  the sink could not serve this round; data stays buffered
    ChService   one honest head's service episode (start, end)
    Energy      one settled debit (bucket, joules)
    End         final clock, rounds completed, packet size
"""
from __future__ import annotations

import enum
import heapq
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import IO, Optional

import numpy as np

from . import kernels
from .attack import AttackProfile, emission_arrays
from .clustering import Cluster, ElectionState, NoAliveNodes, elect_cluster_heads, firefly_noise, form_clusters
from .core import (
    STREAM_ATTACK, STREAM_CRYPTO, STREAM_ELECT, STREAM_FIREFLY, STREAM_TOKENS,
    Network, NetworkConfig, Packet, PacketKind, RadioState, Role, SensorNode, deploy_network, stream,
)
from .energy import BUCKETS, EnergyLedger, airtime, packet_tx_energy, rx_energy
from .metrics import MetricsReport, build_report
from .security import (
    AuthVerdict, ChAuthState, InterlockError, InterlockParty, InterlockResult, SinkAuthority, SinkVerdict,
    SyncVerdict, ToyWideBlockCipher, authenticate_member, check_sync_packet, commitment, interlock_exchange,
    make_report, randbelow, rsa_keygen, sink_verify,
)
from .sink_planner import Infeasible, plan_sink_tour


class EventKind(enum.IntEnum):
    # value doubles as the tie-break rank at equal times
    ROUND_PHASE_CHANGE = 0
    DUTY_CYCLE_TOGGLE = 1
    PACKET_DELIVERY = 2
    SINK_ARRIVAL = 3
    NODE_DEATH = 4


class Phase(enum.Enum):
    CLUSTER_FORMATION = "ClusterFormation"
    DATA_COLLECTION = "DataCollection"
    DATA_RELAY = "DataRelay"
    ROUND_END = "RoundEnd"


class DeliveryOutcome(enum.Enum):
    DELIVERED = "Delivered"
    OUT_OF_RANGE = "OutOfRange"
    RECEIVER_ASLEEP = "ReceiverAsleep"
    RECEIVER_DEAD = "ReceiverDead"


@dataclass(order=True)
class Event:
    time: float
    kind: EventKind
    node: int
    seq: int
    payload: object = field(default=None, compare=False)


class EventQueue:
    """Min-heap ordered by (time, kind rank, node id, insertion order)."""

    def __init__(self) -> None:
        self._heap: list[Event] = []
        self._seq = itertools.count()
        self.last_time = -math.inf

    def push(self, time: float, kind: EventKind, node: int = -1, payload=None) -> Event:
        if time < self.last_time:
            raise ValueError(f"event at {time} scheduled before current time {self.last_time}")
        ev = Event(time, kind, node, next(self._seq), payload)
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> Event:
        ev = heapq.heappop(self._heap)
        self.last_time = ev.time
        return ev

    def __len__(self) -> int:
        return len(self._heap)


class PhaseAccount:
    """Energy owed by each node during one phase, settled in one go at the phase end."""

    def __init__(self) -> None:
        self.debits: dict[int, dict[str, float]] = {}
        self.busy: dict[int, float] = {}
        self.awake: dict[int, float] = {}

    def charge(self, node: int, bucket: str, joules: float) -> None:
        d = self.debits.setdefault(node, {})
        d[bucket] = d.get(bucket, 0.0) + joules

    def add_busy(self, node: int, seconds: float) -> None:
        self.busy[node] = self.busy.get(node, 0.0) + seconds

    def add_awake(self, node: int, seconds: float) -> None:
        self.awake[node] = self.awake.get(node, 0.0) + seconds


@dataclass
class SimState:
    config: NetworkConfig
    network: Network
    seed: int
    clock: float = 0.0
    round: int = 0
    phase: Phase = Phase.CLUSTER_FORMATION
    clusters: list[Cluster] = field(default_factory=list)
    sink_plan: object = None
    ledgers: list[EnergyLedger] = field(default_factory=list)
    auth_states: dict[int, ChAuthState] = field(default_factory=dict)
    election: ElectionState | None = None
    authority: SinkAuthority | None = None
    node_secrets: dict[int, tuple[int, bytes]] = field(default_factory=dict)
    flagged: list[int] = field(default_factory=list)
    vetted: dict[int, bool] = field(default_factory=dict)
    received: dict[int, int] = field(default_factory=dict)
    sent: dict[int, int] = field(default_factory=dict)
    episodes: list[float] = field(default_factory=list)
    buffers: dict[int, dict[int, int]] = field(default_factory=dict)
    queue: EventQueue = field(default_factory=EventQueue)
    account: PhaseAccount = field(default_factory=PhaseAccount)
    events: list[dict] = field(default_factory=list)
    record_events: bool = True
    # per-round scratch
    heads: list[int] = field(default_factory=list)
    round_start: float = 0.0
    served: set = field(default_factory=set)
    relay_duration: float = 0.0

    @property
    def nodes(self) -> list[SensorNode]:
        return self.network.nodes

    @property
    def sink(self) -> SensorNode:
        return self.network.sink

    @property
    def defended(self) -> bool:
        return self.config.scheme == "defended"

    @property
    def flagged_set(self) -> set[int]:
        return set(self.flagged)

    def log(self, time: float, kind: str, node: int = -1, **detail) -> None:
        if self.record_events:
            self.events.append({"time": time, "kind": kind, "node": node, "detail": detail})

    def flag(self, node: int, time: float) -> None:
        if node not in self.flagged:
            self.flagged.append(node)
            self.election.banned.add(node)
            self.log(time, "Flagged", node)

    def vet(self, node: int, time: float) -> None:
        if node not in self.vetted:
            self.vetted[node] = self.nodes[node].is_attacker
            self.log(time, "Vetted", node)

    def alive_ids(self) -> list[int]:
        return [n.id for n in self.nodes if n.alive]


def _node_of(state: SimState, node_id: int) -> SensorNode:
    return state.sink if node_id == state.sink.id else state.nodes[node_id]


def deliver(pkt: Packet, sender: SensorNode, receiver: SensorNode, state: SimState,
            receiver_awake: bool | None = None, distance: float | None = None) -> DeliveryOutcome:
    """Push one packet over the air and charge both radios.

    The sender pays its transmit cost whatever happens; the receiver pays
    reception only when the packet is delivered.
    """
    cfg = state.config
    d = sender.distance_to(receiver) if distance is None else distance
    acc = state.account
    if sender.role is not Role.SINK:
        acc.charge(sender.id, "tx", packet_tx_energy(pkt.bits, d, cfg))
        acc.add_busy(sender.id, airtime(pkt.bits, cfg))
    if d > sender.tx_range:
        return DeliveryOutcome.OUT_OF_RANGE
    if not receiver.alive:
        return DeliveryOutcome.RECEIVER_DEAD
    awake = receiver.radio_state in (RadioState.IDLE, RadioState.RX) if receiver_awake is None else receiver_awake
    if not awake:
        return DeliveryOutcome.RECEIVER_ASLEEP
    if receiver.role is not Role.SINK:
        acc.charge(receiver.id, "rx", rx_energy(pkt.bits, cfg))
        acc.add_busy(receiver.id, airtime(pkt.bits, cfg))
    return DeliveryOutcome.DELIVERED


# ----------------------------------------------------------------- setup

def init_state(config: NetworkConfig, seed: int | None = None, record_events: bool = True) -> SimState:
    seed = config.seed if seed is None else seed
    net = deploy_network(config, seed)
    state = SimState(config=config, network=net, seed=seed, record_events=record_events)
    state.ledgers = [EnergyLedger(n.id, config.initial_energy) for n in net.nodes]
    state.election = ElectionState(config.ch_fraction_z)
    rng = stream(seed, STREAM_CRYPTO)
    keys = rsa_keygen(config.rsa_prime_bits, rng)
    state.authority = SinkAuthority(keys)
    v = keys.m
    width = (v.bit_length() + 7) // 8
    for node in net.nodes:
        f = 2 + randbelow(rng, v - 3)
        pair = rng.bytes(16)
        state.authority.register(node.id, f, pair)
        state.node_secrets[node.id] = (f, pair)
    # compromised devices carry no valid key material
    for node in net.nodes:
        if node.is_attacker:
            junk = rng.bytes(16)
            state.node_secrets[node.id] = (int.from_bytes(rng.bytes(width), "big") % v, junk)
    for node in net.nodes:
        state.log(0.0, "Deploy", node.id, energy=config.initial_energy, attacker=node.is_attacker)
    return state


def _settle(state: SimState, phase_length: float, time: float) -> None:
    """Charge idle/sleep time for the phase, then commit every debit in node order."""
    cfg = state.config
    acc = state.account
    for node in state.nodes:
        if not node.alive:
            continue
        awake = min(acc.awake.get(node.id, 0.0), phase_length)
        busy = acc.busy.get(node.id, 0.0)
        idle = awake - busy
        if idle > 0:
            acc.charge(node.id, "idle", cfg.idle_power * idle)
        if phase_length - awake > 0:
            acc.charge(node.id, "sleep", cfg.sleep_power * (phase_length - awake))
    for node_id in sorted(acc.debits):
        led = state.ledgers[node_id]
        if led.dead:
            continue
        per = acc.debits[node_id]
        for bucket in BUCKETS:
            j = per.get(bucket, 0.0)
            if j > 0.0:
                led.debit(bucket, j)
                state.log(time, "Energy", node_id, bucket=bucket, joules=j)
        node = state.nodes[node_id]
        node.residual_energy = led.residual
        if led.dead and node.alive:
            node.alive = False
            node.radio_state = RadioState.SLEEP
            state.queue.push(time, EventKind.NODE_DEATH, node_id)
    state.account = PhaseAccount()


# ------------------------------------------------------------ phase logic

def _interlock_head(state: SimState, ch: int, time: float) -> bool:
    """Sink-to-head key hand-off; False (and the head flagged) when it fails."""
    auth = state.authority
    f_true = auth.registry[ch]
    key_f, key_pair = state.node_secrets[ch]
    width = (auth.v.bit_length() + 7) // 8
    sink_side = InterlockParty(state.sink.id, ToyWideBlockCipher(auth.pairwise[ch]))
    head_side = InterlockParty(ch, ToyWideBlockCipher(key_pair))
    cfg = state.config

    def channel(pkt: Packet) -> Optional[Packet]:
        sender = _node_of(state, pkt.src)
        receiver = _node_of(state, pkt.dst)
        out = deliver(pkt, sender, receiver, state, receiver_awake=True)
        return pkt if out is DeliveryOutcome.DELIVERED else None

    state.vet(ch, time)
    try:
        verdict = interlock_exchange(sink_side, head_side, f_true.to_bytes(width, "big"),
                                     commitment(f_true, auth.v), auth.v, channel=channel,
                                     now=time, ctrl_size=cfg.ctrl_packet_size)
    except InterlockError:
        verdict = InterlockResult.FAILED
    if verdict is InterlockResult.VERIFIED and head_side.received is not None:
        return True
    state.flag(ch, time)
    return False


def _formation(state: SimState, t0: float) -> None:
    cfg = state.config
    n = cfg.node_count
    flagged = state.flagged_set
    draws = stream(state.seed, STREAM_ELECT, state.round).random(n)
    heads = elect_cluster_heads(state.nodes, state.round, cfg.ch_fraction_z, None,
                                state=state.election, draws=draws)
    heads = sorted(heads)
    if state.defended:
        verified = [h for h in heads if _interlock_head(state, h, t0)]
        tried = set(heads)
        while not verified:
            pool = [nd for nd in state.nodes if nd.alive and nd.id not in tried and nd.id not in state.flagged_set]
            if not pool:
                raise NoAliveNodes("no verifiable cluster head left")
            pick = max(pool, key=lambda nd: (nd.residual_energy, -nd.id))
            tried.add(pick.id)
            state.election.mark_elected(pick.id, state.round)
            if _interlock_head(state, pick.id, t0):
                verified.append(pick.id)
        heads = sorted(verified)
        flagged = state.flagged_set
    state.heads = heads
    state.log(t0, "Elected", -1, heads=heads)
    noise = firefly_noise(stream(state.seed, STREAM_FIREFLY, state.round), n) if cfg.firefly_alpha else None
    alive = [nd for nd in state.nodes if nd.alive]
    state.clusters = form_clusters(alive, heads, cfg, noise=noise, excluded=flagged)
    for nd in state.nodes:
        nd.role = Role.NORMAL
        nd.cluster_id = None
        nd.radio_state = RadioState.IDLE if nd.alive else RadioState.SLEEP
    for c in state.clusters:
        state.nodes[c.ch_id].role = Role.CLUSTER_HEAD
        state.nodes[c.ch_id].cluster_id = c.ch_id
        for m in c.member_ids:
            state.nodes[m].cluster_id = c.ch_id

    # control traffic: head adverts, join requests, TDMA schedules
    acc = state.account
    ctrl_bits = cfg.ctrl_packet_size * 8
    listeners = [nd.id for nd in alive if nd.id not in state.heads]
    for c in state.clusters:
        head = state.nodes[c.ch_id]
        reach = _cluster_reach(state, c)
        acc.charge(head.id, "tx", packet_tx_energy(ctrl_bits, reach, cfg))
        acc.add_busy(head.id, airtime(ctrl_bits, cfg))
        for m in c.member_ids:
            join = Packet(PacketKind.TDMA_SCHEDULE, m, head.id, cfg.ctrl_packet_size, t0)
            deliver(join, state.nodes[m], head, state, receiver_awake=True)
        sched_bits = (cfg.ctrl_packet_size + 2 * len(c.member_ids)) * 8
        acc.charge(head.id, "tx", packet_tx_energy(sched_bits, reach, cfg))
        acc.add_busy(head.id, airtime(sched_bits, cfg))
        for m in c.member_ids:
            acc.charge(m, "rx", rx_energy(sched_bits, cfg))
            acc.add_busy(m, airtime(sched_bits, cfg))
    n_adverts = len(state.clusters)
    for nid in listeners:
        acc.charge(nid, "rx", n_adverts * rx_energy(ctrl_bits, cfg))
        acc.add_busy(nid, n_adverts * airtime(ctrl_bits, cfg))
    for nd in alive:
        acc.add_awake(nd.id, cfg.t_cf)


def _cluster_reach(state: SimState, c: Cluster) -> float:
    head = state.nodes[c.ch_id]
    return max((head.distance_to(state.nodes[m]) for m in c.member_ids), default=0.0)


def _attack_streams(state: SimState, t1: float, length: float):
    """Per target cluster: list of (origin, times, claimed ids) for this phase."""
    cfg = state.config
    attackers = [nd for nd in state.nodes if nd.alive and nd.is_attacker]
    if not attackers or not state.clusters:
        return {}
    prof = AttackProfile.from_config(cfg)
    rng = stream(state.seed, STREAM_ATTACK, state.round)
    by_head = {c.ch_id: c for c in state.clusters}
    out: dict[int, list] = {c.ch_id: [] for c in state.clusters}
    for a in attackers:
        if a.cluster_id is not None:
            home = a.cluster_id
        else:
            home = min(by_head, key=lambda h: (a.distance_to(state.nodes[h]), h))
        targets = list(by_head) if cfg.attack_target == "Broadcast" else [home]
        times, srcs = emission_arrays(prof, a, t1, length, rng, cfg.node_count, replay_src=home)
        if times.size == 0:
            continue
        if cfg.attack_target == "Broadcast":
            d = cfg.tx_range_max
        elif a.id == home:
            d = _cluster_reach(state, by_head[home])
        else:
            d = a.distance_to(state.nodes[home])
        bits = prof.packet_size * 8
        state.account.charge(a.id, "tx", times.size * packet_tx_energy(bits, d, cfg))
        state.account.add_busy(a.id, times.size * airtime(bits, cfg))
        for h in targets:
            if a.distance_to(state.nodes[h]) <= a.tx_range:
                out[h].append((a.id, times, srcs))
    return out


def _merge_streams(streams, exclude_origin: int | None = None):
    parts = [(o, t, s) for o, t, s in streams if o != exclude_origin]
    if not parts:
        return np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    times = np.concatenate([t for _, t, _ in parts])
    srcs = np.concatenate([s for _, _, s in parts])
    origins = np.concatenate([np.full(t.size, o, dtype=np.int64) for o, t, _ in parts])
    order = np.lexsort((origins, times))
    return times[order], srcs[order], origins[order]


def _collection(state: SimState, t1: float) -> None:
    cfg = state.config
    acc = state.account
    length = cfg.t_dc
    end = t1 + length
    period = cfg.duty_period
    listen, win = cfg.listen_period, cfg.sync_window
    n_cycles = max(1, math.ceil(length / period - 1e-9))
    starts = t1 + period * np.arange(n_cycles)
    listen_end = np.minimum(starts + listen, end)
    sync_end = np.minimum(starts + win, end)
    for c, s in enumerate(starts):
        state.queue.push(float(s), EventKind.DUTY_CYCLE_TOGGLE, -1, ("listen", c))
        if listen_end[c] < end:
            state.queue.push(float(listen_end[c]), EventKind.DUTY_CYCLE_TOGGLE, -1, ("sleep", c))
    slot_len = airtime(cfg.packet_size * 8, cfg)
    cap = max(0, math.floor((listen - win) / slot_len + 1e-9))
    ctrl_bits = cfg.ctrl_packet_size * 8
    ctrl_air = airtime(ctrl_bits, cfg)
    prof_kind = PacketKind.DATA if cfg.attack_kind == "DummyDataForgedId" else PacketKind.SYNC
    forged_bits = (cfg.packet_size if prof_kind is PacketKind.DATA else cfg.ctrl_packet_size) * 8
    streams = _attack_streams(state, t1, length)
    prev_flagged = state.flagged_set
    tokens_rng = stream(state.seed, STREAM_TOKENS, state.round)
    state.auth_states = {}
    handled = set()

    for cl in state.clusters:
        head = state.nodes[cl.ch_id]
        members = [m for m in cl.tdma_order if state.nodes[m].alive]
        honest = [m for m in members if not state.nodes[m].is_attacker]
        malicious_head = head.is_attacker
        reach = _cluster_reach(state, cl)
        n_m = len(cl.tdma_order)
        sync_at = {m: win * (k + 1) / (n_m + 1) for k, m in enumerate(cl.tdma_order)}
        times, srcs, origins = _merge_streams(streams.get(cl.ch_id, []))
        state.buffers.setdefault(head.id, {})

        # what the head hears of the forged traffic: only inside its listen windows
        if times.size:
            idx = np.searchsorted(starts, times, side="right") - 1
            at_head = (idx >= 0) & (times < listen_end[np.maximum(idx, 0)]) & (origins != head.id)
        else:
            at_head = np.zeros(0, dtype=bool)

        t_auth = math.inf
        auth = None
        if state.defended and not malicious_head:
            auth = ChAuthState.for_cluster(head.id, members, cfg)
            auth.flagged |= prev_flagged
            state.auth_states[head.id] = auth
            trace = [(float(s + sync_at[m]), m, PacketKind.SYNC) for s in starts for m in honest]
            trace += [(float(t), int(s), prof_kind) for t, s, h in zip(times, srcs, at_head) if h]
            trace.sort(key=lambda e: (e[0], e[1]))
            t_trig = None
            for t, src, kind in trace:
                pkt = Packet(kind, src, head.id, cfg.ctrl_packet_size, t)
                if check_sync_packet(auth, pkt, t, cfg) is SyncVerdict.ENTER_AUTH_MODE:
                    t_trig = t
                    break
            if t_trig is not None:
                state.log(t_trig, "AuthMode", head.id)
                c_idx = int(np.searchsorted(starts, t_trig, side="right") - 1)
                if t_trig < sync_end[c_idx]:
                    t_auth = t_trig
                elif c_idx + 1 < n_cycles:
                    t_auth = float(starts[c_idx + 1])
        if t_auth < math.inf:
            issued = auth.issue_tokens(tokens_rng)
            sa_bits = (cfg.ctrl_packet_size + 8 * len(issued)) * 8
            acc.charge(head.id, "tx", packet_tx_energy(sa_bits, reach, cfg))
            acc.add_busy(head.id, airtime(sa_bits, cfg))
            for m in members:
                node = state.nodes[m]
                acc.charge(m, "rx", rx_energy(sa_bits, cfg))
                acc.add_busy(m, airtime(sa_bits, cfg))
                token = issued[m] if not node.is_attacker else bytes(8)
                reply = Packet(PacketKind.AUTH_TOKEN, m, head.id, cfg.ctrl_packet_size + 8, t_auth, payload=token)
                deliver(reply, node, head, state, receiver_awake=True)
                state.vet(m, t_auth)
                if authenticate_member(auth, reply) is AuthVerdict.FLAGGED:
                    state.flag(m, t_auth)

        # head: listens every listen window, sends one sync per cycle
        if not malicious_head:
            acc.add_awake(head.id, float(np.sum(listen_end - starts)))
            acc.charge(head.id, "tx", n_cycles * packet_tx_energy(ctrl_bits, reach, cfg))
            acc.add_busy(head.id, n_cycles * ctrl_air)
            n_heard_syncs = n_cycles * len(honest)
            acc.charge(head.id, "rx", n_heard_syncs * rx_energy(ctrl_bits, cfg))
            acc.add_busy(head.id, n_heard_syncs * ctrl_air)
            heard = int(np.count_nonzero(at_head))
            acc.charge(head.id, "rx", heard * rx_energy(forged_bits, cfg))
            acc.add_busy(head.id, heard * airtime(forged_bits, cfg))

        sync_mask = np.ones(times.size, dtype=bool) if prof_kind is PacketKind.SYNC else np.zeros(times.size, dtype=bool)
        if state.defended and times.size:
            allowed = np.isin(srcs, np.array(members + [head.id], dtype=np.int64))
            allowed &= ~np.isin(srcs, np.array(sorted(prev_flagged), dtype=np.int64))
            accept_all = allowed & (times < t_auth)
        else:
            accept_all = np.ones(times.size, dtype=bool)
        resyncs = np.sort(np.append(starts, t_auth) if t_auth < math.inf else starts)

        for k, m in enumerate(cl.tdma_order):
            node = state.nodes[m]
            if not node.alive or node.is_attacker:
                continue
            handled.add(m)
            d = node.distance_to(head)
            # TDMA slot, if the schedule has room for this member
            cyc, j = (k // cap, k % cap) if cap else (n_cycles, 0)
            slot = None
            if cyc < n_cycles:
                s0 = float(starts[cyc] + win + j * slot_len)
                if s0 + slot_len <= listen_end[cyc] + 1e-12:
                    slot = (s0, s0 + slot_len)
            b_start = list(starts)
            b_end = list(sync_end)
            if slot is not None:
                b_start.append(slot[0])
                b_end.append(slot[1])
            order = np.argsort(b_start, kind="stable")
            b_start = np.asarray(b_start)[order]
            b_end = np.asarray(b_end)[order]
            sel = sync_mask & (origins != m)
            m_times = times[sel]
            m_accept = accept_all[sel]
            received, awake = kernels.wake_scan(m_times, m_accept, b_start, b_end, listen, t1, end)
            acc.add_awake(m, awake)
            heard = int(np.count_nonzero(received))
            acc.charge(m, "rx", heard * rx_energy(forged_bits, cfg))
            acc.add_busy(m, heard * airtime(forged_bits, cfg))
            # legitimate syncs: the head's plus every other honest member's, each cycle
            n_rx = n_cycles * len(honest)
            acc.charge(m, "rx", n_rx * rx_energy(ctrl_bits, cfg))
            acc.add_busy(m, n_rx * ctrl_air)
            acc.charge(m, "tx", n_cycles * packet_tx_energy(ctrl_bits, d, cfg))
            acc.add_busy(m, n_cycles * ctrl_air)
            if slot is None:
                continue
            adopted = m_times[(received == 1) & m_accept]
            last_sync = resyncs[np.searchsorted(resyncs, slot[0], side="right") - 1]
            aligned = not np.any((adopted >= last_sync) & (adopted < slot[0]))
            acc.charge(m, "sensing", cfg.sensing_energy)
            pkt = Packet(PacketKind.DATA, m, head.id, cfg.packet_size, slot[0])
            out = deliver(pkt, node, head, state, receiver_awake=True, distance=d)
            state.sent[m] = state.sent.get(m, 0) + 1
            state.log(slot[0], "DataSent", m, ch=head.id, aligned=bool(aligned), outcome=out.value)
            if out is DeliveryOutcome.DELIVERED and aligned and not malicious_head and m not in state.flagged_set:
                buf = state.buffers[head.id]
                buf[m] = buf.get(m, 0) + 1

    # attackers stay awake flooding; everyone else not handled above sleeps
    heads = {c.ch_id for c in state.clusters}
    for nd in state.nodes:
        if not nd.alive:
            continue
        if nd.is_attacker:
            acc.add_awake(nd.id, length)
        elif nd.id not in handled and nd.id not in heads:
            acc.add_awake(nd.id, 0.0)


def _relay_plan(state: SimState, t2: float):
    cfg = state.config
    for nid in [b for b in state.buffers if not state.nodes[b].alive]:
        del state.buffers[nid]
    loads = {nid: sum(buf.values()) for nid, buf in state.buffers.items() if sum(buf.values()) > 0}
    if not loads:
        return None
    positions = {nid: state.nodes[nid].position for nid in loads}
    try:
        return plan_sink_tour([], cfg, positions, start=state.sink.position, loads=loads)
    except Infeasible as exc:
        state.log(t2, "PlanInfeasible", -1, reason=str(exc))
        return None


def _serve(state: SimState, ch: int, point, t_a: float, t_b: float, share: float, last: bool) -> None:
    """One head's transmission to the sink parked at ``point``."""
    cfg = state.config
    acc = state.account
    node = state.nodes[ch]
    buf = state.buffers.get(ch, {})
    load = sum(buf.values())
    bits = math.ceil(cfg.aggregation_xi * load * cfg.packet_size * 8)
    d = math.dist(node.position, point)
    acc.charge(ch, "tx", share * packet_tx_energy(bits, d, cfg))
    acc.add_busy(ch, min(share * airtime(bits, cfg), t_b - t_a))
    acc.add_awake(ch, t_b - t_a)
    if not last:
        return
    if d > node.tx_range:
        state.log(t_b, "SinkReport", ch, verdict="Rejected", packets=load, origins=[])
        return
    payload = f"{ch}:{state.round}:{load}".encode()
    if state.defended:
        f, _ = state.node_secrets[ch]
        report = make_report(ch, payload, f, state.authority.keys.public)
        verdict = sink_verify(report, state.authority)
    else:
        verdict = SinkVerdict.ACCEPTED
    origins = sorted(buf.items())
    if verdict is SinkVerdict.ACCEPTED:
        for src, k in origins:
            state.received[src] = state.received.get(src, 0) + k
        if ch in state.heads and load > 0:
            state.served.add(ch)
    state.log(t_b, "SinkReport", ch, verdict=verdict.value, packets=load,
              origins=[[s, k] for s, k in origins] if verdict is SinkVerdict.ACCEPTED else [])
    state.buffers[ch] = {}


# ----------------------------------------------------------------- driver

def _handle(state: SimState, ev: Event) -> None:
    cfg = state.config
    state.clock = ev.time
    if ev.kind is EventKind.NODE_DEATH:
        state.log(ev.time, "NodeDeath", ev.node)
        return
    if ev.kind is EventKind.DUTY_CYCLE_TOGGLE:
        state.log(ev.time, "DutyCycleToggle", -1, state=ev.payload[0], cycle=ev.payload[1])
        return
    if ev.kind is EventKind.SINK_ARRIVAL:
        point, windows = ev.payload
        state.log(ev.time, "SinkArrival", -1, point=list(point))
        state.sink.position = point
        for ch, t_a, t_b, share, last in windows:
            _serve(state, ch, point, t_a, t_b, share, last)
        return
    phase = ev.payload
    state.log(ev.time, "RoundPhaseChange", -1, phase=phase.value, round=state.round)
    if phase is Phase.CLUSTER_FORMATION:
        state.phase = phase
        state.round_start = ev.time
        state.served = set()
        _formation(state, ev.time)
        state.queue.push(ev.time + cfg.t_cf, EventKind.ROUND_PHASE_CHANGE, -1, Phase.DATA_COLLECTION)
    elif phase is Phase.DATA_COLLECTION:
        _settle(state, cfg.t_cf, ev.time)
        state.phase = phase
        _collection(state, ev.time)
        state.queue.push(ev.time + cfg.t_dc, EventKind.ROUND_PHASE_CHANGE, -1, Phase.DATA_RELAY)
    elif phase is Phase.DATA_RELAY:
        _settle(state, cfg.t_dc, ev.time)
        state.phase = phase
        plan = _relay_plan(state, ev.time)
        state.sink_plan = plan
        duration = 0.0
        if plan is not None:
            duration = plan.total_time + plan.travel_time
            per_ch_slots: dict[int, int] = {}
            for stop in plan.stops:
                for ch, slots in stop.served_chs:
                    per_ch_slots[ch] = per_ch_slots.get(ch, 0) + slots
            seen: dict[int, int] = {}
            here = state.sink.position
            t = ev.time
            for stop in plan.stops:
                if cfg.sink_speed > 0:
                    t += math.dist(here, stop.point) / cfg.sink_speed
                here = stop.point
                arrive = t
                windows = []
                for ch, slots in stop.served_chs:
                    seen[ch] = seen.get(ch, 0) + slots
                    windows.append((ch, t, t + slots * cfg.slot_time_T,
                                    slots / per_ch_slots[ch], seen[ch] == per_ch_slots[ch]))
                    t += slots * cfg.slot_time_T
                state.queue.push(arrive, EventKind.SINK_ARRIVAL, -1, (stop.point, windows))
        state.relay_duration = duration
        state.queue.push(ev.time + duration, EventKind.ROUND_PHASE_CHANGE, -1, Phase.ROUND_END)
    elif phase is Phase.ROUND_END:
        _settle(state, state.relay_duration, ev.time)
        for ch in state.heads:
            if ch in state.served and not state.nodes[ch].is_attacker:
                state.episodes.append(ev.time - state.round_start)
                state.log(ev.time, "ChService", ch, start=state.round_start, end=ev.time)
        state.round += 1
        state.phase = phase


def run_round(state: SimState, config: NetworkConfig | None = None, rng=None) -> SimState:
    """Run one full round starting at the current clock.

    Randomness comes from per-purpose streams keyed by (seed, round), so
    ``rng`` is accepted for interface symmetry but not consumed.
    """
    if not any(n.alive for n in state.nodes):
        raise NoAliveNodes("no alive nodes")
    state.queue.push(state.clock, EventKind.ROUND_PHASE_CHANGE, -1, Phase.CLUSTER_FORMATION)
    while len(state.queue):
        _handle(state, state.queue.pop())
    return state


@dataclass
class RunResult:
    report: MetricsReport
    events: list[dict]
    state: SimState


def _report(state: SimState) -> MetricsReport:
    vetted = dict(state.vetted) if state.defended else {n.id: n.is_attacker for n in state.nodes}
    return build_report(received=state.received, sent=state.sent, ledgers=state.ledgers,
                        episodes=state.episodes, vetted=vetted, flagged=state.flagged,
                        packet_size=state.config.packet_size, duration=state.clock,
                        rounds=state.round)


def run_simulation(config: NetworkConfig, seed: int | None = None, record_events: bool = True) -> RunResult:
    state = init_state(config, seed, record_events)
    while state.clock < config.sim_time and any(n.alive for n in state.nodes):
        try:
            run_round(state)
        except NoAliveNodes:
            break
    state.log(state.clock, "End", -1, rounds=state.round, packet_size=config.packet_size,
              all_vetted=not state.defended)
    return RunResult(report=_report(state), events=state.events, state=state)


def write_event_log(events: list[dict], fh: IO[str]) -> None:
    for rec in events:
        fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")


def read_event_log(fh: IO[str]) -> list[dict]:
    return [json.loads(line) for line in fh if line.strip()]
